//! 8-bit grayscale rasters, lossless file I/O and the nest (window) view.
//!
//! Two on-disk formats are supported. Binary PGM is canonical:
//!
//! ```text
//! P5\n<width> <height>\n255\n<width*height raw bytes, row-major>
//! ```
//!
//! Readers accept any whitespace and `#` comments in the header, as netpbm
//! does. PNG is accepted when it is 8-bit grayscale without alpha; PNG output
//! is never interlaced.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use thiserror::Error;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported PGM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("unsupported bit depth {0} (only 8-bit is supported)")]
    UnsupportedBitDepth(u8),
    #[error("truncated image data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed image header: {0}")]
    Malformed(String),
    #[error("sample count {samples} does not match {width}x{height}")]
    SizeMismatch {
        width: usize,
        height: usize,
        samples: usize,
    },
    #[error("nest size {nest_size} does not fit a {width}x{height} image")]
    EmptyNest {
        nest_size: usize,
        width: usize,
        height: usize,
    },
    #[error("nest size must be at least 2, got {0}")]
    InvalidNestSize(usize),
    #[error("nest ({row}, {col}) of size {nest_size} lies outside the image")]
    NestOutOfBounds {
        row: usize,
        col: usize,
        nest_size: usize,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("PNG encode error: {0}")]
    PngEncode(#[from] png::EncodingError),
}

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, ImageError> {
        if width.checked_mul(height) != Some(samples.len()) {
            return Err(ImageError::SizeMismatch {
                width,
                height,
                samples: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    /// Builds a grid from `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    pub fn same_dims(&self, other: &PixelGrid) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// A square window of the grid, addressed by nest row and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NestIndex {
    pub row: usize,
    pub col: usize,
    pub nest_size: usize,
}

impl NestIndex {
    /// Top-left pixel as `(x, y)`.
    pub fn origin(&self) -> (usize, usize) {
        (self.col * self.nest_size, self.row * self.nest_size)
    }

    /// Raster ordinal among the whole nests of a grid with `nest_cols` columns.
    pub fn raster_index(&self, nest_cols: usize) -> usize {
        self.row * nest_cols + self.col
    }

    pub fn from_raster(index: usize, nest_cols: usize, nest_size: usize) -> Self {
        Self {
            row: index / nest_cols,
            col: index % nest_cols,
            nest_size,
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (x0, y0) = self.origin();
        (x0..x0 + self.nest_size).contains(&x) && (y0..y0 + self.nest_size).contains(&y)
    }

    fn fits(&self, grid: &PixelGrid) -> bool {
        let (x0, y0) = self.origin();
        self.nest_size > 0
            && x0 + self.nest_size <= grid.width
            && y0 + self.nest_size <= grid.height
    }
}

/// Nest rows and columns for a grid, `(rows, cols)`.
pub fn nest_layout(grid: &PixelGrid, nest_size: usize) -> (usize, usize) {
    if nest_size == 0 {
        return (0, 0);
    }
    (grid.height / nest_size, grid.width / nest_size)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<PixelGrid, ImageError> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

/// Decodes PGM or PNG, detected by magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<PixelGrid, ImageError> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(ImageError::UnsupportedFormat(format!(
            "netpbm variant P{}",
            bytes[1] as char
        )))
    } else {
        Err(ImageError::UnsupportedFormat(
            "not a binary PGM or PNG file".into(),
        ))
    }
}

/// Writes PNG when the extension is `.png` (any case), binary PGM otherwise.
pub fn save_image(grid: &PixelGrid, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        encode_png(grid)?
    } else {
        encode_pgm(grid)
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_pgm(grid: &PixelGrid) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", grid.width, grid.height);
    let mut out = Vec::with_capacity(header.len() + grid.samples.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&grid.samples);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<PixelGrid, ImageError> {
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::Malformed(
                "expected a decimal header field".into(),
            ));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| ImageError::Malformed(format!("header field {text} out of range")))?;
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(ImageError::Malformed(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: data.len(),
        });
    }
    PixelGrid::new(width, height, data[..expected].to_vec())
}

pub fn encode_png(grid: &PixelGrid) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, grid.width as u32, grid.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&grid.samples)?;
        writer.finish()?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<PixelGrid, ImageError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_read_error)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(ImageError::UnsupportedFormat(format!(
            "PNG color type {:?} (only 8-bit grayscale is supported)",
            info.color_type
        )));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::UnsupportedBitDepth(info.bit_depth as u8));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Malformed("PNG dimensions overflow".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(png_read_error)?;
    let stride = frame.line_size;
    let mut samples = Vec::with_capacity(width * height);
    for row in buf.chunks(stride).take(height) {
        samples.extend_from_slice(&row[..width]);
    }
    PixelGrid::new(width, height, samples)
}

fn png_read_error(e: png::DecodingError) -> ImageError {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            ImageError::Truncated {
                expected: 0,
                found: 0,
            }
        }
        png::DecodingError::IoError(io) => ImageError::Io(io),
        other => ImageError::Malformed(other.to_string()),
    }
}

/// Whole nests of the grid in row-major order. Border pixels that do not
/// make up a whole nest belong to none.
pub fn nests(grid: &PixelGrid, nest_size: usize) -> Result<Vec<NestIndex>, ImageError> {
    if nest_size < 2 {
        return Err(ImageError::InvalidNestSize(nest_size));
    }
    if nest_size > grid.width || nest_size > grid.height {
        return Err(ImageError::EmptyNest {
            nest_size,
            width: grid.width,
            height: grid.height,
        });
    }
    let (rows, cols) = nest_layout(grid, nest_size);
    Ok((0..rows)
        .flat_map(|row| {
            (0..cols).map(move |col| NestIndex {
                row,
                col,
                nest_size,
            })
        })
        .collect())
}

pub fn extract_nest(grid: &PixelGrid, nest: NestIndex) -> Result<PixelGrid, ImageError> {
    if !nest.fits(grid) {
        return Err(out_of_bounds(nest));
    }
    let (x0, y0) = nest.origin();
    let n = nest.nest_size;
    let mut samples = Vec::with_capacity(n * n);
    for y in y0..y0 + n {
        let start = y * grid.width + x0;
        samples.extend_from_slice(&grid.samples[start..start + n]);
    }
    Ok(PixelGrid {
        width: n,
        height: n,
        samples,
    })
}

/// Copies `block` into the window at `nest`.
pub fn write_nest(
    grid: &mut PixelGrid,
    nest: NestIndex,
    block: &PixelGrid,
) -> Result<(), ImageError> {
    let n = nest.nest_size;
    if !nest.fits(grid) || block.width != n || block.height != n {
        return Err(out_of_bounds(nest));
    }
    let (x0, y0) = nest.origin();
    for (dy, row) in block.samples.chunks(n).enumerate() {
        let start = (y0 + dy) * grid.width + x0;
        grid.samples[start..start + n].copy_from_slice(row);
    }
    Ok(())
}

fn out_of_bounds(nest: NestIndex) -> ImageError {
    ImageError::NestOutOfBounds {
        row: nest.row,
        col: nest.col,
        nest_size: nest.nest_size,
    }
}
