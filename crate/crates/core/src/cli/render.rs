//! Binary PGM rendering of map CSVs.

use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::read_csv;

/// Min-max normalized 8-bit raster, rows from the largest y down.
pub fn pgm_bytes(rows: &[(f64, f64, f64)]) -> Result<Vec<u8>> {
    let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let (nx, ny) = (xs.len(), ys.len());
    if nx * ny != rows.len() {
        return Err(Error::Parse {
            line: 0,
            msg: format!("{} rows do not form a {nx}×{ny} grid", rows.len()),
        });
    }
    let lo = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let mut px = vec![0u8; nx * ny];
    let mut seen = vec![false; nx * ny];
    for (i, &(x, y, v)) in rows.iter().enumerate() {
        let ix = xs.binary_search_by(|a| a.total_cmp(&x)).expect("x present");
        let iy = ys.binary_search_by(|a| a.total_cmp(&y)).expect("y present");
        let at = (ny - 1 - iy) * nx + ix;
        if seen[at] {
            return Err(Error::Parse { line: i + 2, msg: format!("duplicate point ({x}, {y})") });
        }
        seen[at] = true;
        px[at] = if hi > lo { (255.0 * (v - lo) / (hi - lo)).floor() as u8 } else { 0 };
    }
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.extend_from_slice(&px);
    Ok(out)
}

pub fn render_reader<R: BufRead>(r: R) -> Result<Vec<u8>> {
    pgm_bytes(&read_csv(r)?)
}

pub fn render_map(csv: &Path, out: &Path) -> Result<()> {
    let f = std::io::BufReader::new(std::fs::File::open(csv)?);
    std::fs::write(out, render_reader(f)?)?;
    Ok(())
}
