//! A small textual DSL for upsampling-generator architectures: one header
//! line fixing the input tensor, then one `block(...)` per ×2-resolution
//! stage. The module supplies the parser, a canonical printer (the
//! interchange format for `.arch` files), a spatial forward simulator with
//! per-component taps, and an analytic magnitude-spectrum predictor to hold
//! against the simulator's measured spectra.

use crate::norm_act::{activate, normalize, ActKind, NormKind, NormParams};
use crate::rng::Pcg32;
use crate::synth::layers::{depthwise_forward, ConvLayer};
use crate::synth::UKind;
use crate::tensor::{Matrix, Tensor3};
use crate::upsample::{bilinear_kernel, nearest_kernel, zero_interleave};
use crate::{Error, Result};

/// Hard ceiling on any simulated resolution; doubling past this is a
/// spec-authoring mistake, not a workload.
pub const MAX_RESOLUTION: usize = 65536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PadKind {
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SeqOrder {
    /// norm/act before the conv
    Pre,
    /// conv first, then norm/act
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BlockSpec {
    pub u: UKind,
    pub k: usize,
    pub ch: usize,
    pub pad: PadKind,
    pub norm: NormKind,
    pub act: ActKind,
    pub sc: bool,
    pub seq: SeqOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ArchSpec {
    /// (channels, height, width)
    pub input: (usize, usize, usize),
    pub blocks: Vec<BlockSpec>,
}

// ---------------------------------------------------------------- lexer --

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokKind {
    Ident,
    Int,
    LParen,
    RParen,
    Comma,
    Equals,
    Eof,
}

#[derive(Debug, Clone)]
struct Tok {
    kind: TokKind,
    text: String,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |ch: char, line: &mut usize, col: &mut usize| {
            if ch == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        if c.is_whitespace() {
            chars.next();
            bump(c, &mut line, &mut col);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                } else {
                    break;
                }
            }
            toks.push(Tok { kind: TokKind::Ident, text: s, line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                } else {
                    break;
                }
            }
            toks.push(Tok { kind: TokKind::Int, text: s, line: tl, col: tc });
            continue;
        }
        let kind = match c {
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            ',' => TokKind::Comma,
            '=' => TokKind::Equals,
            other => {
                return Err(Error::Parse {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character '{other}'"),
                })
            }
        };
        chars.next();
        bump(c, &mut line, &mut col);
        toks.push(Tok { kind, text: c.to_string(), line: tl, col: tc });
    }
    toks.push(Tok { kind: TokKind::Eof, text: String::new(), line, col });
    Ok(toks)
}

// --------------------------------------------------------------- parser --

struct Parser {
    toks: Vec<Tok>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i]
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.i].clone();
        if self.toks[self.i].kind != TokKind::Eof {
            self.i += 1;
        }
        t
    }

    fn fail<T>(&self, tok: &Tok, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: tok.line, col: tok.col, msg: msg.into() })
    }

    fn expect(&mut self, kind: TokKind, what: &str) -> Result<Tok> {
        let t = self.next();
        if t.kind != kind {
            return self.fail(&t, format!("expected {what}, found '{}'", t.text));
        }
        Ok(t)
    }

    fn int(&mut self, what: &str) -> Result<(usize, Tok)> {
        let t = self.expect(TokKind::Int, what)?;
        match t.text.parse::<usize>() {
            Ok(v) => Ok((v, t)),
            Err(_) => self.fail(&t, format!("{what} out of range: '{}'", t.text)),
        }
    }
}

pub fn parse(text: &str) -> Result<ArchSpec> {
    let mut p = Parser { toks: lex(text)?, i: 0 };

    let head = p.expect(TokKind::Ident, "'input' header")?;
    if head.text != "input" {
        return p.fail(&head, format!("expected 'input' header, found '{}'", head.text));
    }
    p.expect(TokKind::LParen, "'('")?;
    let (c, ct) = p.int("channel count")?;
    if c == 0 {
        return p.fail(&ct, "channel count must be at least 1");
    }
    p.expect(TokKind::Comma, "','")?;
    let (h, ht) = p.int("input height")?;
    p.expect(TokKind::Comma, "','")?;
    let (w, wt) = p.int("input width")?;
    p.expect(TokKind::RParen, "')'")?;
    if h == 0 || h > MAX_RESOLUTION {
        return p.fail(&ht, format!("input height {h} outside 1..={MAX_RESOLUTION}"));
    }
    if w == 0 || w > MAX_RESOLUTION {
        return p.fail(&wt, format!("input width {w} outside 1..={MAX_RESOLUTION}"));
    }

    let mut blocks = Vec::new();
    let (mut res_h, mut res_w) = (h, w);
    loop {
        let t = p.next();
        match t.kind {
            TokKind::Eof => break,
            TokKind::Ident if t.text == "block" => {
                let block = parse_block(&mut p)?;
                res_h *= 2;
                res_w *= 2;
                if res_h > MAX_RESOLUTION || res_w > MAX_RESOLUTION {
                    return p.fail(
                        &t,
                        format!(
                            "resolution overflow: block {} reaches {res_h}x{res_w}, limit {MAX_RESOLUTION}",
                            blocks.len()
                        ),
                    );
                }
                blocks.push(block);
            }
            _ => return p.fail(&t, format!("expected 'block' or end of input, found '{}'", t.text)),
        }
    }
    if blocks.is_empty() {
        let eof = p.peek().clone();
        return p.fail(&eof, "expected at least one block");
    }
    Ok(ArchSpec { input: (c, h, w), blocks })
}

fn parse_block(p: &mut Parser) -> Result<BlockSpec> {
    p.expect(TokKind::LParen, "'('")?;
    let mut u = None;
    let mut k = None;
    let mut ch = None;
    let mut pad = None;
    let mut norm = None;
    let mut act = None;
    let mut sc = None;
    let mut seq = None;
    loop {
        let key = p.expect(TokKind::Ident, "a key")?;
        p.expect(TokKind::Equals, "'='")?;
        match key.text.as_str() {
            "u" => {
                let v = parse_u(p)?;
                set_once(p, &key, &mut u, v)?;
            }
            "k" => {
                let (v, vt) = p.int("kernel size")?;
                if v % 2 == 0 || v == 0 {
                    return p.fail(&vt, format!("kernel size must be odd, got {v}"));
                }
                set_once(p, &key, &mut k, v)?;
            }
            "ch" => {
                let (v, vt) = p.int("channel count")?;
                if v == 0 {
                    return p.fail(&vt, "channel count must be at least 1");
                }
                set_once(p, &key, &mut ch, v)?;
            }
            "pad" => {
                let v = parse_enum(p, "pad", &[("zero", PadKind::Zero)])?;
                set_once(p, &key, &mut pad, v)?;
            }
            "norm" => {
                let v = parse_enum(
                    p,
                    "norm",
                    &[
                        ("batch", NormKind::Batch),
                        ("instance", NormKind::Instance),
                        ("none", NormKind::None),
                    ],
                )?;
                set_once(p, &key, &mut norm, v)?;
            }
            "act" => {
                let v = parse_enum(
                    p,
                    "act",
                    &[
                        ("relu", ActKind::Relu),
                        ("sigmoid", ActKind::Sigmoid),
                        ("tanh", ActKind::Tanh),
                        ("none", ActKind::None),
                    ],
                )?;
                set_once(p, &key, &mut act, v)?;
            }
            "sc" => {
                let v = parse_enum(p, "sc", &[("true", true), ("false", false)])?;
                set_once(p, &key, &mut sc, v)?;
            }
            "seq" => {
                let v = parse_enum(p, "seq", &[("pre", SeqOrder::Pre), ("post", SeqOrder::Post)])?;
                set_once(p, &key, &mut seq, v)?;
            }
            other => return p.fail(&key, format!("unknown key '{other}'")),
        }
        let t = p.next();
        match t.kind {
            TokKind::Comma => continue,
            TokKind::RParen => break,
            _ => return p.fail(&t, format!("expected ',' or ')', found '{}'", t.text)),
        }
    }
    let closing = p.toks[p.i - 1].clone();
    let missing = |name: &str| Error::Parse {
        line: closing.line,
        col: closing.col,
        msg: format!("missing required key '{name}'"),
    };
    Ok(BlockSpec {
        u: u.ok_or_else(|| missing("u"))?,
        k: k.ok_or_else(|| missing("k"))?,
        ch: ch.ok_or_else(|| missing("ch"))?,
        pad: pad.ok_or_else(|| missing("pad"))?,
        norm: norm.ok_or_else(|| missing("norm"))?,
        act: act.ok_or_else(|| missing("act"))?,
        sc: sc.ok_or_else(|| missing("sc"))?,
        seq: seq.ok_or_else(|| missing("seq"))?,
    })
}

fn set_once<T>(p: &Parser, key: &Tok, slot: &mut Option<T>, value: T) -> Result<()> {
    if slot.is_some() {
        return p.fail(key, format!("duplicate key '{}'", key.text));
    }
    *slot = Some(value);
    Ok(())
}

fn parse_u(p: &mut Parser) -> Result<UKind> {
    parse_enum(
        p,
        "u",
        &[("nearest", UKind::Nearest), ("bilinear", UKind::Bilinear), ("deconv", UKind::Deconv)],
    )
}

fn parse_enum<T: Copy>(p: &mut Parser, key: &str, table: &[(&str, T)]) -> Result<T> {
    let t = p.next();
    if t.kind != TokKind::Ident {
        return p.fail(&t, format!("expected a value for {key}, found '{}'", t.text));
    }
    table
        .iter()
        .find(|(name, _)| *name == t.text)
        .map(|&(_, v)| v)
        .ok_or(())
        .or_else(|_| p.fail(&t, format!("unknown enum value '{}' for {key}", t.text)))
}

// -------------------------------------------------------------- printer --

fn u_name(u: UKind) -> &'static str {
    match u {
        UKind::Nearest => "nearest",
        UKind::Bilinear => "bilinear",
        UKind::Deconv => "deconv",
    }
}

fn norm_name(n: NormKind) -> &'static str {
    match n {
        NormKind::Batch => "batch",
        NormKind::Instance => "instance",
        NormKind::None => "none",
    }
}

fn act_name(a: ActKind) -> &'static str {
    match a {
        ActKind::Relu => "relu",
        ActKind::Sigmoid => "sigmoid",
        ActKind::Tanh => "tanh",
        ActKind::None => "none",
    }
}

/// Canonical text form; `parse(print(s)) == s` for every valid spec.
pub fn print(spec: &ArchSpec) -> Result<String> {
    if spec.blocks.is_empty() {
        return Err(Error::InvalidArg("cannot print an architecture with no blocks".into()));
    }
    let mut out = format!("input({},{},{})\n", spec.input.0, spec.input.1, spec.input.2);
    for b in &spec.blocks {
        out.push_str(&format!(
            "block(u={},k={},ch={},pad=zero,norm={},act={},sc={},seq={})\n",
            u_name(b.u),
            b.k,
            b.ch,
            norm_name(b.norm),
            act_name(b.act),
            b.sc,
            match b.seq {
                SeqOrder::Pre => "pre",
                SeqOrder::Post => "post",
            }
        ));
    }
    Ok(out)
}

// ------------------------------------------------------------ simulator --

struct BlockWeights {
    deconv: Option<ConvLayer>,
    conv: ConvLayer,
}

/// An ArchSpec with concrete random weights drawn from a seed.
pub struct ArchModel {
    pub spec: ArchSpec,
    pub seed: u64,
    blocks: Vec<BlockWeights>,
}

impl ArchModel {
    pub fn instantiate(spec: &ArchSpec, seed: u64) -> Result<Self> {
        if spec.blocks.is_empty() {
            return Err(Error::InvalidArg("architecture has no blocks".into()));
        }
        let mut rng = Pcg32::new(seed);
        let mut ch_prev = spec.input.0;
        let mut blocks = Vec::with_capacity(spec.blocks.len());
        for b in &spec.blocks {
            let deconv = match b.u {
                UKind::Deconv => Some(ConvLayer::random(ch_prev, ch_prev, b.k, &mut rng)?),
                _ => None,
            };
            let conv = ConvLayer::random(ch_prev, b.ch, b.k, &mut rng)?;
            blocks.push(BlockWeights { deconv, conv });
            ch_prev = b.ch;
        }
        Ok(ArchModel { spec: spec.clone(), seed, blocks })
    }

    /// Run the block chain spatially, returning the output and a tap after
    /// every executed component, in execution order.
    pub fn forward(&self, img: &Tensor3) -> Result<(Tensor3, Vec<(String, Tensor3)>)> {
        let (c, h, w) = self.spec.input;
        if img.channels() != c || img.height() != h || img.width() != w {
            return Err(Error::DimMismatch(format!(
                "input {}x{}x{} does not match declared {c}x{h}x{w}",
                img.channels(),
                img.height(),
                img.width()
            )));
        }
        let mut cur = img.clone();
        let mut taps: Vec<(String, Tensor3)> = Vec::new();
        let mut tap = |name: String, t: &Tensor3| taps.push((name, t.clone()));
        for (i, (b, wts)) in self.spec.blocks.iter().zip(&self.blocks).enumerate() {
            let entry = cur.clone();
            cur = match b.u {
                UKind::Nearest => depthwise_forward(&zero_interleave(&cur), &nearest_kernel()),
                UKind::Bilinear => depthwise_forward(&zero_interleave(&cur), &bilinear_kernel()),
                UKind::Deconv => {
                    wts.deconv.as_ref().expect("deconv weights exist").forward(&zero_interleave(&cur))?
                }
            };
            tap(format!("b{i}.up-{}", u_name(b.u)), &cur);

            let run_norm_act = |cur: &mut Tensor3,
                                    tap: &mut dyn FnMut(String, &Tensor3)|
             -> Result<()> {
                if b.norm != NormKind::None {
                    *cur = normalize(cur, &NormParams::unit(b.norm, cur.channels()))?;
                    tap(format!("b{i}.norm-{}", norm_name(b.norm)), cur);
                }
                if b.act != ActKind::None {
                    *cur = activate(cur, b.act);
                    tap(format!("b{i}.act-{}", act_name(b.act)), cur);
                }
                Ok(())
            };
            match b.seq {
                SeqOrder::Post => {
                    cur = wts.conv.forward(&cur)?;
                    tap(format!("b{i}.conv"), &cur);
                    run_norm_act(&mut cur, &mut tap)?;
                }
                SeqOrder::Pre => {
                    run_norm_act(&mut cur, &mut tap)?;
                    cur = wts.conv.forward(&cur)?;
                    tap(format!("b{i}.conv"), &cur);
                }
            }

            if b.sc {
                let branch = depthwise_forward(&zero_interleave(&entry), &bilinear_kernel());
                // channel counts rarely line up; fall back to broadcasting the
                // channel-mean plane when they don't
                let branch = if branch.channels() == cur.channels() {
                    branch
                } else {
                    let mean = branch.channel_mean();
                    Tensor3::from_channels(vec![mean; cur.channels()])?
                };
                let mut sum = cur.clone();
                for (s, b) in sum.as_mut_slice().iter_mut().zip(branch.as_slice()) {
                    *s += b;
                }
                cur = sum;
                tap(format!("b{i}.shortcut"), &cur);
            }
        }
        Ok((cur, taps))
    }

    /// Analytic magnitude-spectrum estimate: replicate per upsample, multiply
    /// by the upsampling kernel's magnitude spectrum and by each conv's
    /// channel-averaged magnitude spectrum. Norm stages zero the DC bin (unit
    /// affine parameters); their uniform non-DC scale factor is dropped since
    /// every consumer is scale-free. Activations pass through. A shortcut
    /// adds its branch's magnitudes — a documented |A+B| ≈ |A|+|B| bound.
    pub fn predict_spectrum(&self, input_mean_spectrum: &Matrix) -> Result<Matrix> {
        let (_, h, w) = self.spec.input;
        if input_mean_spectrum.height() != h || input_mean_spectrum.width() != w {
            return Err(Error::DimMismatch(format!(
                "spectrum {}x{} vs declared input {h}x{w}",
                input_mean_spectrum.height(),
                input_mean_spectrum.width()
            )));
        }
        let mut p = input_mean_spectrum.clone();
        for (b, wts) in self.spec.blocks.iter().zip(&self.blocks) {
            let entry = p.clone();
            p = repeat_magnitude(&p);
            let up_factor = match b.u {
                UKind::Nearest => kernel_magnitude(&nearest_kernel(), p.height(), p.width())?,
                UKind::Bilinear => kernel_magnitude(&bilinear_kernel(), p.height(), p.width())?,
                UKind::Deconv => averaged_kernel_magnitude(
                    wts.deconv.as_ref().expect("deconv weights exist"),
                    p.height(),
                    p.width(),
                )?,
            };
            p = p.zip_map(&up_factor, |a, b| a * b)?;
            let conv_factor = averaged_kernel_magnitude(&wts.conv, p.height(), p.width())?;
            match b.seq {
                SeqOrder::Post => {
                    p = p.zip_map(&conv_factor, |a, b| a * b)?;
                    if b.norm != NormKind::None {
                        p[(0, 0)] = 0.0;
                    }
                }
                SeqOrder::Pre => {
                    if b.norm != NormKind::None {
                        p[(0, 0)] = 0.0;
                    }
                    p = p.zip_map(&conv_factor, |a, b| a * b)?;
                }
            }
            if b.sc {
                let branch = repeat_magnitude(&entry);
                let tent = kernel_magnitude(&bilinear_kernel(), p.height(), p.width())?;
                let branch = branch.zip_map(&tent, |a, b| a * b)?;
                p = p.zip_map(&branch, |a, b| a + b)?;
            }
        }
        Ok(p)
    }
}

/// `forward` on a freshly instantiated model.
pub fn forward_sim(
    spec: &ArchSpec,
    img: &Tensor3,
    seed: u64,
) -> Result<(Tensor3, Vec<(String, Tensor3)>)> {
    ArchModel::instantiate(spec, seed)?.forward(img)
}

fn repeat_magnitude(m: &Matrix) -> Matrix {
    Matrix::from_fn(2 * m.height(), 2 * m.width(), |u, v| m[(u % m.height(), v % m.width())])
}

fn kernel_magnitude(taps: &Matrix, h: usize, w: usize) -> Result<Matrix> {
    Ok(crate::dft::dft2(&crate::dft::zero_pad(taps, h, w)?)?.magnitude())
}

fn averaged_kernel_magnitude(layer: &ConvLayer, h: usize, w: usize) -> Result<Matrix> {
    let kernel = &layer.kernel;
    let mut acc = Matrix::zeros(h, w);
    for i in 0..kernel.in_channels() {
        for j in 0..kernel.out_channels() {
            let mag = kernel_magnitude(&kernel.taps(i, j), h, w)?;
            for (a, m) in acc.as_mut_slice().iter_mut().zip(mag.as_slice()) {
                *a += m;
            }
        }
    }
    let pairs = (kernel.in_channels() * kernel.out_channels()) as f64;
    Ok(acc.map(|v| v / pairs))
}
