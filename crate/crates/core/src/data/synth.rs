//! Programmatic text-line renderer for desk-scale experiments.
//!
//! Glyphs come from a 5x7 dot-matrix font. A [`Style`] controls how the dots
//! are stamped (size, stroke thickness, slant, spacing, baseline jitter), so
//! two styles give two visually distinct "hands" over the same characters.
//! Images are written black-on-white, like a scanned page.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{mix, stream, Stream};

use super::manifest::write_manifest;
use super::LineImage;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// Dot rows top to bottom, `#` is ink.
fn glyph(c: char) -> Option<[&'static str; GLYPH_H]> {
    Some(match c {
        'a' => [".....", ".....", ".###.", "....#", ".####", "#...#", ".####"],
        'b' => ["#....", "#....", "#.##.", "##..#", "#...#", "#...#", "####."],
        'c' => [".....", ".....", ".###.", "#....", "#....", "#...#", ".###."],
        'd' => ["....#", "....#", ".##.#", "#..##", "#...#", "#...#", ".####"],
        'e' => [".....", ".....", ".###.", "#...#", "#####", "#....", ".###."],
        'f' => ["..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."],
        'g' => [".....", ".####", "#...#", "#...#", ".####", "....#", ".###."],
        'h' => ["#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#"],
        'i' => ["..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."],
        'j' => ["...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."],
        'k' => ["#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."],
        'l' => [".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
        'm' => [".....", ".....", "##.#.", "#.#.#", "#.#.#", "#...#", "#...#"],
        'n' => [".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#"],
        'o' => [".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."],
        'p' => [".....", ".....", "####.", "#...#", "####.", "#....", "#...."],
        'q' => [".....", ".....", ".##.#", "#..##", ".####", "....#", "....#"],
        'r' => [".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."],
        's' => [".....", ".....", ".###.", "#....", ".###.", "....#", "####."],
        't' => [".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."],
        'u' => [".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"],
        'v' => [".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
        'w' => [".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#."],
        'x' => [".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"],
        'y' => [".....", ".....", "#...#", "#...#", ".####", "....#", ".###."],
        'z' => [".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"],
        '0' => [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
        '1' => ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
        '2' => [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
        '3' => ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
        '4' => ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
        '5' => ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
        '6' => ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
        '7' => ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
        '8' => [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
        '9' => [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
        '.' => [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."],
        ',' => [".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."],
        '-' => [".....", ".....", ".....", "#####", ".....", ".....", "....."],
        '\'' => [".##..", "..#..", ".#...", ".....", ".....", ".....", "....."],
        ' ' => [".....", ".....", ".....", ".....", ".....", ".....", "....."],
        _ => return None,
    })
}

pub fn renderable(c: char) -> bool {
    glyph(c).is_some()
}

/// Stroke style of a synthetic hand.
#[derive(Clone, Debug, PartialEq)]
pub struct Style {
    pub name: String,
    /// Pixel pitch of one font dot.
    pub dot: usize,
    /// Extra ink radius around each dot.
    pub thickness: usize,
    /// Horizontal shift per pixel above the baseline.
    pub slant: f64,
    /// Gap between glyph cells in pixels.
    pub spacing: usize,
    /// Maximum vertical offset per glyph in pixels.
    pub jitter: usize,
    /// Gray value of ink, 0 is black.
    pub ink: u8,
}

impl Style {
    /// Upright, thin, tight.
    pub fn modern() -> Self {
        Style {
            name: "modern".into(),
            dot: 3,
            thickness: 0,
            slant: 0.0,
            spacing: 2,
            jitter: 1,
            ink: 0,
        }
    }

    /// Slanted, heavy, wide.
    pub fn historical() -> Self {
        Style {
            name: "historical".into(),
            dot: 3,
            thickness: 1,
            slant: 0.35,
            spacing: 4,
            jitter: 2,
            ink: 0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "modern" => Ok(Self::modern()),
            "historical" => Ok(Self::historical()),
            other => Err(Error::Config(format!("unknown synthetic style `{other}`"))),
        }
    }

    fn advance(&self) -> usize {
        GLYPH_W * self.dot + self.spacing
    }
}

/// Render `text` black-on-white at the given height (raw 0-255 values).
pub fn render_line<R: Rng + ?Sized>(text: &str, style: &Style, height: usize, rng: &mut R) -> Result<LineImage> {
    let glyph_h = GLYPH_H * style.dot;
    if glyph_h + 2 * (style.jitter + style.thickness) > height {
        return Err(Error::Config(format!("style `{}` does not fit height {height}", style.name)));
    }
    let n = text.chars().count().max(1);
    let lean = (style.slant * glyph_h as f64).ceil() as usize;
    let margin = 4 + style.thickness;
    let width = 2 * margin + n * style.advance() + lean;
    let top = (height - glyph_h) / 2;
    let mut img = LineImage::filled(width, height, 255.0)?;
    let r = style.thickness as isize;
    for (k, ch) in text.chars().enumerate() {
        let rows = glyph(ch).ok_or_else(|| Error::Config(format!("no glyph for {ch:?}")))?;
        let j = style.jitter as isize;
        let dy: isize = if j > 0 { rng.gen_range(-j..=j) } else { 0 };
        let x0 = margin + k * style.advance();
        for (gy, row) in rows.iter().enumerate() {
            for (gx, cell) in row.bytes().enumerate() {
                if cell != b'#' {
                    continue;
                }
                for py in 0..style.dot {
                    let y = (top + gy * style.dot + py) as isize + dy;
                    let rise = (top + glyph_h) as f64 - y as f64;
                    let shift = (style.slant * rise).round() as isize;
                    for px in 0..style.dot {
                        let x = (x0 + gx * style.dot + px) as isize + shift;
                        for oy in -r..=r {
                            for ox in -r..=r {
                                let (xx, yy) = (x + ox, y + oy);
                                if xx >= 0 && yy >= 0 && (xx as usize) < width && (yy as usize) < height {
                                    img.set(xx as usize, yy as usize, f32::from(style.ink));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(img)
}

/// One synthetic corpus: a style, a character set and split sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub name: String,
    pub style: Style,
    pub charset: Vec<char>,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub height: usize,
    pub domains: Vec<DomainSpec>,
}

impl SynthSpec {
    /// Source/target pair: `modern` source and `historical` target whose
    /// character sets overlap only partly.
    pub fn source_target(source_lines: usize, target_lines: usize, height: usize) -> Self {
        let source: Vec<char> = "abcdefghijklmnopqr ".chars().collect();
        let target: Vec<char> = "ghijklmnopqrstuvwxyz ".chars().collect();
        SynthSpec {
            height,
            domains: vec![
                DomainSpec {
                    name: "source".into(),
                    style: Style::modern(),
                    charset: source,
                    train: source_lines,
                    valid: (source_lines / 10).max(1),
                    test: (source_lines / 10).max(1),
                    min_len: 3,
                    max_len: 8,
                },
                DomainSpec {
                    name: "target".into(),
                    style: Style::historical(),
                    charset: target,
                    train: target_lines,
                    valid: target_lines.max(1),
                    test: target_lines.max(1),
                    min_len: 3,
                    max_len: 8,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let distinct = self
            .domains
            .iter()
            .enumerate()
            .any(|(i, d)| self.domains[..i].iter().any(|e| e.style != d.style));
        if !distinct {
            return Err(Error::Config("synthetic corpus needs at least two distinct styles".into()));
        }
        for d in &self.domains {
            let letters: Vec<char> = d.charset.iter().copied().filter(|&c| c != ' ').collect();
            if letters.is_empty() {
                return Err(Error::Config(format!("domain `{}` has an empty charset", d.name)));
            }
            if let Some(&c) = d.charset.iter().find(|&&c| !renderable(c)) {
                return Err(Error::Config(format!("domain `{}`: no glyph for {c:?}", d.name)));
            }
            if d.min_len == 0 || d.min_len > d.max_len {
                return Err(Error::Config(format!("domain `{}`: bad length range", d.name)));
            }
        }
        Ok(())
    }
}

/// Random line of `min_len..=max_len` characters. Spaces, when in the
/// charset, only separate words.
pub fn random_text<R: Rng + ?Sized>(charset: &[char], min_len: usize, max_len: usize, rng: &mut R) -> String {
    let letters: Vec<char> = charset.iter().copied().filter(|&c| c != ' ').collect();
    let spaces = charset.contains(&' ');
    let len = rng.gen_range(min_len..=max_len);
    let mut out = String::new();
    let mut since_space = 0;
    for i in 0..len {
        let can_space = spaces && since_space >= 2 && i + 2 < len;
        if can_space && rng.gen_bool(0.25) {
            out.push(' ');
            since_space = 0;
        } else {
            out.push(*letters.choose(rng).expect("non-empty"));
            since_space += 1;
        }
    }
    out
}

/// Manifest paths written by [`synth_generate`] for one domain.
#[derive(Clone, Debug)]
pub struct DomainFiles {
    pub name: String,
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

/// Render every domain of `spec` under `out_dir/<domain>/` with manifests
/// `train.tsv`, `valid.tsv`, `test.tsv` and PNGs under `img/`.
pub fn synth_generate(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<Vec<DomainFiles>> {
    spec.validate()?;
    let mut files = Vec::new();
    for (di, d) in spec.domains.iter().enumerate() {
        let dir = out_dir.join(&d.name);
        let img_dir = dir.join("img");
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        let mut paths = Vec::new();
        for (si, (split, count)) in [("train", d.train), ("valid", d.valid), ("test", d.test)].into_iter().enumerate() {
            let mut entries = Vec::with_capacity(count);
            for i in 0..count {
                let mut rng = stream(seed, Stream::Synth, mix(&[di as u64, si as u64, i as u64]));
                let text = random_text(&d.charset, d.min_len, d.max_len, &mut rng);
                let img = render_line(&text, &d.style, spec.height, &mut rng)?;
                let rel = format!("img/{split}_{i:05}.png");
                img.write_raw_png(&dir.join(&rel))?;
                entries.push((rel, text));
            }
            let manifest = dir.join(format!("{split}.tsv"));
            write_manifest(&manifest, &entries)?;
            paths.push(manifest);
        }
        let [train, valid, test]: [PathBuf; 3] = paths.try_into().expect("three splits");
        files.push(DomainFiles {
            name: d.name.clone(),
            train,
            valid,
            test,
        });
    }
    Ok(files)
}
