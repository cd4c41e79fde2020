//! Interleaved RGB output image.

use std::io::{self, Write};
use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelBuffer {
    pub width: usize,
    pub height: usize,
    /// R, G, B bytes, row-major from the top-left pixel.
    pub data: Vec<u8>,
}

impl PixelBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        PixelBuffer { width, height, data: vec![0; width * height * 3] }
    }

    pub fn row_bytes(&self) -> usize {
        self.width * 3
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Mutable bytes of pixel rows `rows`.
    pub fn rows_mut(&mut self, rows: Range<usize>) -> &mut [u8] {
        let line = self.row_bytes();
        &mut self.data[rows.start * line..rows.end * line]
    }

    /// Binary PPM (P6, maxval 255).
    pub fn write_ppm(&self, mut w: impl Write) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 20);
        self.write_ppm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Reads a P6 file with maxval 255. Comments are not supported.
    pub fn from_ppm(bytes: &[u8]) -> Option<PixelBuffer> {
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while bytes.get(pos)?.is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while !bytes.get(pos)?.is_ascii_whitespace() {
                pos += 1;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
        }
        pos += 1;
        if fields[0] != "P6" || fields[3] != "255" {
            return None;
        }
        let width: usize = fields[1].parse().ok()?;
        let height: usize = fields[2].parse().ok()?;
        let data = bytes.get(pos..pos + width * height * 3)?.to_vec();
        Some(PixelBuffer { width, height, data })
    }
}
