//! Plain (P2) PGM export with a JSON sidecar carrying the world frame.
//! Occupied cells are black (0), free cells white (255). The top image row is
//! the grid's highest `y` row.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{OccupancyGrid, FREE, OCCUPIED};
use crate::geometry::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

/// `map.pgm` -> `map.meta.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn encode_pgm(grid: &OccupancyGrid) -> String {
    let mut out = format!("P2\n{} {}\n255\n", grid.width, grid.height);
    for iy in (0..grid.height).rev() {
        let row: Vec<&str> = (0..grid.width)
            .map(|ix| if grid.is_free(ix, iy) { "255" } else { "0" })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_pgm(grid: &OccupancyGrid, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(grid)).map_err(|e| Error::io(path, e))?;
    let meta = GridMeta {
        origin: [grid.origin.x, grid.origin.y],
        resolution: grid.resolution,
        width: grid.width,
        height: grid.height,
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&side, e))?;
    Ok(())
}

/// Parse P2 text into `(width, height, maxval, pixels)`.
pub fn decode_pgm(text: &str) -> Result<(usize, usize, u32, Vec<u32>)> {
    let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        content
            .split_whitespace()
            .map(move |t| (i as u64 + 1, t))
    });
    let parse_err = |line: u64, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    match tokens.next() {
        Some((_, "P2")) => {}
        Some((line, other)) => return Err(parse_err(line, &format!("bad magic {other:?}"))),
        None => return Err(parse_err(1, "empty file")),
    }
    let mut header = [0u32; 3];
    let mut last_line = 1;
    for slot in header.iter_mut() {
        let (line, tok) = tokens.next().ok_or_else(|| parse_err(last_line, "truncated header"))?;
        last_line = line;
        *slot = tok
            .parse()
            .map_err(|_| parse_err(line, &format!("bad header value {tok:?}")))?;
    }
    let (w, h, maxval) = (header[0] as usize, header[1] as usize, header[2]);
    if maxval == 0 {
        return Err(parse_err(last_line, "maxval must be positive"));
    }
    let mut pixels = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        let (line, tok) = tokens
            .next()
            .ok_or_else(|| parse_err(last_line, "truncated pixel data"))?;
        last_line = line;
        let v: u32 = tok
            .parse()
            .map_err(|_| parse_err(line, &format!("bad pixel {tok:?}")))?;
        if v > maxval {
            return Err(parse_err(line, &format!("pixel {v} exceeds maxval {maxval}")));
        }
        pixels.push(v);
    }
    Ok((w, h, maxval, pixels))
}

pub fn load_pgm(path: &Path) -> Result<OccupancyGrid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (w, h, maxval, pixels) = decode_pgm(&text)?;
    let side = sidecar_path(path);
    let meta_text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: GridMeta = serde_json::from_str(&meta_text)?;
    if meta.width != w || meta.height != h {
        return Err(Error::GridMismatch(format!(
            "sidecar says {}x{}, image is {w}x{h}",
            meta.width, meta.height
        )));
    }
    if !(meta.resolution > 0.0) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("non-positive resolution {}", meta.resolution),
        });
    }
    let mut grid = OccupancyGrid::new(
        Vec2::new(meta.origin[0], meta.origin[1]),
        meta.resolution,
        w,
        h,
        true,
    );
    for (row, chunk) in pixels.chunks(w.max(1)).enumerate().take(h) {
        let iy = h - 1 - row;
        for (ix, &v) in chunk.iter().enumerate() {
            let i = grid.index(ix, iy);
            grid.cells[i] = if 2 * v >= maxval { FREE } else { OCCUPIED };
        }
    }
    Ok(grid)
}
