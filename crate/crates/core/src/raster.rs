//! Intensity rasters, binary masks and their file formats.
//!
//! Raster binary layout (little endian): magic `RLRT`, `u32` width, `u32`
//! height, then `width·height` `f32` intensities in row-major order.
//! Masks are written as binary PGM (`P5`) with maxval 1.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const RASTER_MAGIC: &[u8; 4] = b"RLRT";

/// Row-major image of normalized intensities in `[0, 1]`.
///
/// Pixel `(i, j)` is column `i` (downrange) and row `j` (crossrange).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Input(format!(
                "{} pixels for a {width}x{height} raster",
                pixels.len()
            )));
        }
        if let Some((k, v)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Input(format!(
                "pixel {k} has intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[j * self.width + i]
    }

    pub fn same_shape(&self, mask: &BinaryMask) -> Result<()> {
        if (self.width, self.height) != (mask.width, mask.height) {
            return Err(Error::Input(format!(
                "raster is {}x{} but mask is {}x{}",
                self.width, self.height, mask.width, mask.height
            )));
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(RASTER_MAGIC)?;
        out.write_all(&(self.width as u32).to_le_bytes())?;
        out.write_all(&(self.height as u32).to_le_bytes())?;
        for &p in &self.pixels {
            out.write_all(&(p as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != RASTER_MAGIC {
            return Err(Error::Input("not a raster file (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let width = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let height = u32::from_le_bytes(word) as usize;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Input(format!("raster dimensions {width}x{height} overflow")))?;
        let mut bytes = vec![0u8; n * 4];
        input.read_exact(&mut bytes)?;
        let pixels = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(width, height, pixels)
    }

    /// Comma-separated rows, one image row per line.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut pixels = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (line_no, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Input(format!("line {}: {e}", line_no + 1)))?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Input(format!(
                        "line {}: expected {w} values, found {}",
                        line_no + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            pixels.extend(row);
            height += 1;
        }
        Self::new(width.unwrap_or(0), height, pixels)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Loads `.csv` files as CSV and anything else as the binary format.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Input(format!("cannot open raster {}: {e}", path.display())))?;
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            Self::read_csv(file)
        } else {
            Self::read_binary(BufReader::new(file))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            self.write_csv(file)
        } else {
            self.write_binary(file)
        }
    }
}

/// Per-pixel binary decision map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Input(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[j * self.width + i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::Input(format!(
                "mask is {}x{} but other is {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n1\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.bits.iter().map(|b| u8::from(*b)).collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    /// Reads a binary PGM; any non-zero sample is a set bit.
    pub fn read_pgm<R: Read>(input: R) -> Result<Self> {
        let mut data = Vec::new();
        BufReader::new(input).read_to_end(&mut data)?;
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < data.len() && (data[pos].is_ascii_whitespace() || data[pos] == b'#') {
                if data[pos] == b'#' {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Input("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
        }
        pos += 1; // single whitespace after maxval
        if fields[0] != "P5" {
            return Err(Error::Input(format!("unsupported PGM magic {}", fields[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Input(format!("bad PGM header field {s}: {e}")))
        };
        let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if maxval > 255 {
            return Err(Error::Input("16-bit PGM masks are not supported".into()));
        }
        let n = width * height;
        if data.len() < pos + n {
            return Err(Error::Input("truncated PGM data".into()));
        }
        Self::new(
            width,
            height,
            data[pos..pos + n].iter().map(|b| *b != 0).collect(),
        )
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Input(format!("cannot open mask {}: {e}", path.display())))?;
        Self::read_pgm(file)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        self.write_pgm(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// 8-connected component labelling of the set bits. Labels start at 1;
/// unset pixels get 0. Returns the label image and the component count.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, usize) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            for n in neighbors8(idx, w, h) {
                if mask.bits[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    (labels, next as usize)
}

/// Row-major indices of the up to eight neighbours of `idx`.
pub fn neighbors8(idx: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (i, j) = ((idx % width) as isize, (idx / width) as isize);
    let (w, h) = (width as isize, height as isize);
    (-1isize..=1)
        .flat_map(move |dj| (-1isize..=1).map(move |di| (i + di, j + dj)))
        .filter(move |&(x, y)| (x, y) != (i, j) && x >= 0 && y >= 0 && x < w && y < h)
        .map(move |(x, y)| (y * w + x) as usize)
}
