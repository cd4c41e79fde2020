//! Whole-image coefficient storage: all Y blocks, then all Cb blocks, then all
//! Cr blocks, each plane row-major in block units.
//!
//! Lanes work on horizontal bands of MCU rows. [`CoefRowsMut::split_at_row`]
//! hands a finished band to a reader while the entropy stage keeps writing
//! the rows below it.

use crate::parser::ImageGeometry;

/// 8x8 coefficients in natural row-major order.
pub type Block = [i16; 64];

#[derive(Debug, Clone)]
pub struct CoefficientBuffer {
    pub geometry: ImageGeometry,
    pub y: Vec<Block>,
    pub cb: Vec<Block>,
    pub cr: Vec<Block>,
}

impl CoefficientBuffer {
    pub fn new(geometry: ImageGeometry) -> Self {
        let rows = geometry.mcu_rows;
        CoefficientBuffer {
            geometry,
            y: vec![[0; 64]; rows * geometry.blocks_per_row(0)],
            cb: vec![[0; 64]; rows * geometry.blocks_per_row(1)],
            cr: vec![[0; 64]; rows * geometry.blocks_per_row(2)],
        }
    }

    pub fn plane(&self, c: usize) -> &[Block] {
        match c {
            0 => &self.y,
            1 => &self.cb,
            _ => &self.cr,
        }
    }

    pub fn rows(&self) -> CoefRows<'_> {
        CoefRows {
            geometry: self.geometry,
            first_row: 0,
            row_count: self.geometry.mcu_rows,
            planes: [&self.y, &self.cb, &self.cr],
        }
    }

    pub fn rows_mut(&mut self) -> CoefRowsMut<'_> {
        CoefRowsMut {
            geometry: self.geometry,
            first_row: 0,
            row_count: self.geometry.mcu_rows,
            planes: [&mut self.y, &mut self.cb, &mut self.cr],
        }
    }

    /// Top-left `mcus_wide` x `mcu_rows` MCUs as a stand-alone buffer for a
    /// `width` x `height` image. Used to profile the parallel phase on crops.
    pub fn crop(&self, width: usize, height: usize) -> CoefficientBuffer {
        let geometry = ImageGeometry::new(width, height, self.geometry.subsampling);
        assert!(
            geometry.mcus_per_row <= self.geometry.mcus_per_row
                && geometry.mcu_rows <= self.geometry.mcu_rows,
            "crop larger than source"
        );
        let mut out = CoefficientBuffer::new(geometry);
        for c in 0..3 {
            let src_bpr = self.geometry.blocks_per_row(c);
            let dst_bpr = geometry.blocks_per_row(c);
            let src = self.plane(c);
            let dst = match c {
                0 => &mut out.y,
                1 => &mut out.cb,
                _ => &mut out.cr,
            };
            for r in 0..geometry.mcu_rows {
                dst[r * dst_bpr..(r + 1) * dst_bpr]
                    .copy_from_slice(&src[r * src_bpr..r * src_bpr + dst_bpr]);
            }
        }
        out
    }

    pub fn payload_bytes(&self) -> usize {
        (self.y.len() + self.cb.len() + self.cr.len()) * std::mem::size_of::<Block>()
    }
}

/// Read-only band of MCU rows `first_row..first_row + row_count`.
#[derive(Debug, Clone, Copy)]
pub struct CoefRows<'a> {
    pub geometry: ImageGeometry,
    pub first_row: usize,
    pub row_count: usize,
    planes: [&'a [Block]; 3],
}

impl<'a> CoefRows<'a> {
    pub fn plane(&self, c: usize) -> &'a [Block] {
        self.planes[c]
    }

    /// Blocks of component `c` in band-relative MCU row `r`.
    pub fn row(&self, c: usize, r: usize) -> &'a [Block] {
        let bpr = self.geometry.blocks_per_row(c);
        &self.planes[c][r * bpr..(r + 1) * bpr]
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.first_row..self.first_row + self.row_count
    }

    pub fn split_at_row(self, n: usize) -> (CoefRows<'a>, CoefRows<'a>) {
        assert!(n <= self.row_count);
        let g = self.geometry;
        let mut heads: [&[Block]; 3] = [&[]; 3];
        let mut tails: [&[Block]; 3] = [&[]; 3];
        for c in 0..3 {
            let (h, t) = self.planes[c].split_at(n * g.blocks_per_row(c));
            heads[c] = h;
            tails[c] = t;
        }
        (
            CoefRows { geometry: g, first_row: self.first_row, row_count: n, planes: heads },
            CoefRows { geometry: g, first_row: self.first_row + n, row_count: self.row_count - n, planes: tails },
        )
    }

    pub fn payload_bytes(&self) -> usize {
        self.planes.iter().map(|p| p.len()).sum::<usize>() * std::mem::size_of::<Block>()
    }
}

/// Writable band of MCU rows, exclusively borrowed from a [`CoefficientBuffer`].
#[derive(Debug)]
pub struct CoefRowsMut<'a> {
    pub geometry: ImageGeometry,
    pub first_row: usize,
    pub row_count: usize,
    planes: [&'a mut [Block]; 3],
}

impl<'a> CoefRowsMut<'a> {
    pub fn row_mut(&mut self, c: usize, r: usize) -> &mut [Block] {
        let bpr = self.geometry.blocks_per_row(c);
        &mut self.planes[c][r * bpr..(r + 1) * bpr]
    }

    pub fn split_at_row(self, n: usize) -> (CoefRowsMut<'a>, CoefRowsMut<'a>) {
        assert!(n <= self.row_count);
        let g = self.geometry;
        let [y, cb, cr] = self.planes;
        let (y0, y1) = y.split_at_mut(n * g.blocks_per_row(0));
        let (b0, b1) = cb.split_at_mut(n * g.blocks_per_row(1));
        let (r0, r1) = cr.split_at_mut(n * g.blocks_per_row(2));
        (
            CoefRowsMut { geometry: g, first_row: self.first_row, row_count: n, planes: [y0, b0, r0] },
            CoefRowsMut {
                geometry: g,
                first_row: self.first_row + n,
                row_count: self.row_count - n,
                planes: [y1, b1, r1],
            },
        )
    }

    pub fn freeze(self) -> CoefRows<'a> {
        let [y, cb, cr] = self.planes;
        CoefRows { geometry: self.geometry, first_row: self.first_row, row_count: self.row_count, planes: [y, cb, cr] }
    }
}
