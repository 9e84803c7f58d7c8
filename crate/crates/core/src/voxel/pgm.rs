//! Netpbm graymap decoding (`P2` plain and `P5` binary).

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major, `pixels[x + width * y]`.
    pub pixels: Vec<u16>,
}

struct Header<'a> {
    rest: &'a [u8],
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        loop {
            match self.rest.first() {
                Some(b) if b.is_ascii_whitespace() => self.rest = &self.rest[1..],
                Some(b'#') => {
                    let end = self
                        .rest
                        .iter()
                        .position(|&b| b == b'\n')
                        .unwrap_or(self.rest.len());
                    self.rest = &self.rest[end..];
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        self.skip_space_and_comments();
        let len = self.rest.iter().take_while(|b| b.is_ascii_digit()).count();
        if len == 0 || len > 9 {
            return Err(format!("bad {what}"));
        }
        let text = std::str::from_utf8(&self.rest[..len]).expect("ascii digits");
        self.rest = &self.rest[len..];
        Ok(text.parse().expect("at most nine digits"))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err("not a PGM file (expected P2 or P5 magic)".into()),
    };
    let mut h = Header { rest: &bytes[2..] };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err("image has zero size".into());
    }
    if !(1..=65535).contains(&maxval) {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let n = width.checked_mul(height).ok_or("image too large")?;
    let pixels = if binary {
        match h.rest.first() {
            Some(b) if b.is_ascii_whitespace() => h.rest = &h.rest[1..],
            _ => return Err("missing separator before raster".into()),
        }
        let wide = maxval > 255;
        let need = if wide {
            n.checked_mul(2).ok_or("image too large")?
        } else {
            n
        };
        if h.rest.len() != need {
            return Err(format!(
                "raster has {} bytes, expected {need}",
                h.rest.len()
            ));
        }
        if wide {
            h.rest
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            h.rest.iter().map(|&b| b as u16).collect()
        }
    } else {
        // every plain sample takes at least two bytes
        if n > h.rest.len() / 2 + 1 {
            return Err("raster shorter than width * height".into());
        }
        let mut px = Vec::with_capacity(n);
        for _ in 0..n {
            px.push(h.number("sample")? as u16);
        }
        h.skip_space_and_comments();
        if !h.rest.is_empty() {
            return Err("trailing data after raster".into());
        }
        px
    };
    if let Some(&bad) = pixels.iter().find(|&&p| p as usize > maxval) {
        return Err(format!("sample {bad} exceeds maxval {maxval}"));
    }
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval > 255 {
        out.extend(img.pixels.iter().flat_map(|p| p.to_be_bytes()));
    } else {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_binary_agree() {
        let plain = parse_pgm(b"P2\n# comment\n3 2\n255\n0 10 20\n30 40 255\n").unwrap();
        assert_eq!(plain.pixels, vec![0, 10, 20, 30, 40, 255]);
        let binary = parse_pgm(&write_pgm(&plain)).unwrap();
        assert_eq!(binary, plain);
    }

    #[test]
    fn sixteen_bit() {
        let img = GrayImage {
            width: 2,
            height: 1,
            maxval: 1000,
            pixels: vec![999, 3],
        };
        assert_eq!(parse_pgm(&write_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_pgm(b"P6\n1 1\n255\n\0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\0\0\0").is_err());
        assert!(parse_pgm(b"P2\n1 1\n10\n11\n").is_err());
        assert!(parse_pgm(b"P2\n0 1\n10\n").is_err());
        assert!(parse_pgm(b"P5\n99999 99999\n255\n").is_err());
    }
}
