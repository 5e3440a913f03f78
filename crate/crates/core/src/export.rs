//! Output encodings.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly and keeps repeated runs byte-identical. Layouts
//! are described in `docs/FORMATS.md`.

use std::io::{self, Read, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::bifurcation::{BasinLabel, BasinReport, ScanRow};
use crate::manifolds::{Curve, HorizontalSegment};
use crate::maps::{ReducedPoint, RegionTag};

pub const SCHEMA_VERSION: u32 = 1;

pub const RASTER_MAGIC: [u8; 4] = *b"BSNR";
pub const RASTER_VERSION: u16 = 1;
pub const RASTER_HEADER_LEN: usize = 56;

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}").to_lowercase()
    }
}

/// Pretty JSON with floats in the fixed 17-digit form; non-finite values
/// become `null`.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(io::Error::other)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(io::Error::other)
}

pub fn branch_name(tag: RegionTag) -> &'static str {
    match tag {
        RegionTag::FullM1 => "M1",
        RegionTag::FullM2 => "M2",
        RegionTag::FullM3 => "M3",
        RegionTag::ReducedM1 => "f1",
        RegionTag::ReducedM2 => "f2",
        RegionTag::OnSingularPlus => "singular+",
        RegionTag::OnSingularMinus => "singular-",
    }
}

/// One row of an orbit file. `branch` is the branch applied to leave the
/// point, empty for the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRow {
    pub index: usize,
    pub s: f64,
    pub theta: f64,
    pub branch: Option<RegionTag>,
}

pub const ORBIT_HEADER: &str = "index,s,theta,branch";

pub fn write_orbit_row<W: Write>(w: &mut W, row: &OrbitRow) -> io::Result<()> {
    writeln!(
        w,
        "{},{},{},{}",
        row.index,
        fmt_f64(row.s),
        fmt_f64(row.theta),
        row.branch.map_or("", branch_name)
    )
}

/// Footer closing an orbit file: `# status=<ok|died>,last_index=<k>`.
pub fn write_orbit_footer<W: Write>(w: &mut W, status: &str, last_index: usize) -> io::Result<()> {
    writeln!(w, "# status={status},last_index={last_index}")
}

pub const CURVE_HEADER: &str = "theta,s,kind,piece";

pub fn write_curve<W: Write>(w: &mut W, curve: &Curve, piece: usize) -> io::Result<()> {
    for p in &curve.points {
        writeln!(w, "{},{},{},{}", fmt_f64(p.theta), fmt_f64(p.s), curve.kind.label(), piece)?;
    }
    Ok(())
}

/// A horizontal segment as two rows sharing a piece number.
pub fn write_segment<W: Write>(w: &mut W, seg: &HorizontalSegment, piece: usize) -> io::Result<()> {
    for p in seg.endpoints() {
        writeln!(w, "{},{},unstable_local,{}", fmt_f64(p.theta), fmt_f64(p.s), piece)?;
    }
    Ok(())
}

pub const POINTS_HEADER: &str = "s,theta";

pub fn write_points<W: Write>(w: &mut W, points: &[ReducedPoint]) -> io::Result<()> {
    writeln!(w, "{POINTS_HEADER}")?;
    for p in points {
        writeln!(w, "{},{}", fmt_f64(p.s), fmt_f64(p.theta))?;
    }
    Ok(())
}

pub const BASIN_HEADER: &str = "s,theta,label,steps";

pub fn write_basin_csv<W: Write>(w: &mut W, report: &BasinReport) -> io::Result<()> {
    writeln!(w, "{BASIN_HEADER}")?;
    for (k, (label, steps)) in report.labels.iter().zip(&report.steps).enumerate() {
        let (s, theta) = report.grid.point(k);
        writeln!(w, "{},{},{},{}", fmt_f64(s), fmt_f64(theta), label.name(), steps)?;
    }
    Ok(())
}

pub const SCAN_HEADER: &str = "lambda,regime,fraction_to_p,attractor_nonempty,homoclinic,q_count,p_count,error";

pub fn write_scan_row<W: Write>(w: &mut W, lambda: f64, row: Result<&ScanRow, &str>) -> io::Result<()> {
    match row {
        Ok(r) => writeln!(
            w,
            "{},{},{},{},{},{},{},",
            fmt_f64(r.lambda),
            r.regime.label(),
            fmt_f64(r.fraction_to_p),
            r.attractor_nonempty,
            r.homoclinic,
            r.q_count,
            r.p_count
        ),
        Err(e) => writeln!(w, "{},,,,,,,\"{}\"", fmt_f64(lambda), e.replace('"', "'")),
    }
}

/// Decoded basin raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub n_s: u32,
    pub n_theta: u32,
    pub lambda: f64,
    /// `[s_min, s_max, θ_min, θ_max]`.
    pub extent: [f64; 4],
    /// Row-major labels, one row per θ value.
    pub labels: Vec<u8>,
}

impl Raster {
    pub fn from_report(report: &BasinReport) -> Self {
        let g = report.grid;
        Raster {
            n_s: g.n_s as u32,
            n_theta: g.n_theta as u32,
            lambda: report.lambda,
            extent: [g.s_min, g.s_max, g.theta_min, g.theta_max],
            labels: report.labels.iter().map(|l| *l as u8).collect(),
        }
    }
}

/// Little-endian layout: magic, version, reserved, `n_s`, `n_θ`, `λ`, extent,
/// then one byte per cell.
pub fn write_raster<W: Write>(w: &mut W, raster: &Raster) -> io::Result<()> {
    w.write_all(&RASTER_MAGIC)?;
    w.write_all(&RASTER_VERSION.to_le_bytes())?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&raster.n_s.to_le_bytes())?;
    w.write_all(&raster.n_theta.to_le_bytes())?;
    w.write_all(&raster.lambda.to_le_bytes())?;
    for v in raster.extent {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&raster.labels)
}

pub fn read_raster<R: Read>(r: &mut R) -> io::Result<Raster> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut header = [0u8; RASTER_HEADER_LEN];
    r.read_exact(&mut header)?;
    if header[0..4] != RASTER_MAGIC {
        return Err(bad("not a basin raster"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != RASTER_VERSION {
        return Err(bad("unsupported raster version"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let n_s = u32_at(8);
    let n_theta = u32_at(12);
    let lambda = f64_at(16);
    let extent = [f64_at(24), f64_at(32), f64_at(40), f64_at(48)];
    let len = n_s as usize * n_theta as usize;
    let mut labels = vec![0u8; len];
    r.read_exact(&mut labels)?;
    if labels.iter().any(|&b| BasinLabel::from_u8(b).is_none()) {
        return Err(bad("unknown label byte"));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after raster"));
    }
    Ok(Raster { n_s, n_theta, lambda, extent, labels })
}
