use std::cell::{OnceCell, RefCell};
use std::fmt::Write;
use std::rc::Rc;
use std::sync::Arc;

use image::RgbImage;
use spatial_core::geometry::{camera_center, ExtrinsicPose, Intrinsics, PointCloud};
use spatial_core::recon::ReconstructionBundle;

pub type ListRef = Rc<RefCell<Vec<Value>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Range,
    Len,
    Tool(Tool),
}

/// The frozen `pySpatial` surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tool {
    Reconstruct,
    DescribeCameraMotion,
    SynthesizeNovelView,
    RotateRight,
    RotateLeft,
    MoveForward,
    MoveBackward,
    TurnAround,
    EstimateDepth,
}

impl Tool {
    pub const ALL: [Tool; 9] = [
        Tool::Reconstruct,
        Tool::DescribeCameraMotion,
        Tool::SynthesizeNovelView,
        Tool::RotateRight,
        Tool::RotateLeft,
        Tool::MoveForward,
        Tool::MoveBackward,
        Tool::TurnAround,
        Tool::EstimateDepth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tool::Reconstruct => "reconstruct",
            Tool::DescribeCameraMotion => "describe_camera_motion",
            Tool::SynthesizeNovelView => "synthesize_novel_view",
            Tool::RotateRight => "rotate_right",
            Tool::RotateLeft => "rotate_left",
            Tool::MoveForward => "move_forward",
            Tool::MoveBackward => "move_backward",
            Tool::TurnAround => "turn_around",
            Tool::EstimateDepth => "estimate_depth",
        }
    }

    pub fn from_name(name: &str) -> Option<Tool> {
        Tool::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Parameter names, required ones first.
    pub fn params(self) -> (&'static [&'static str], usize) {
        match self {
            Tool::Reconstruct => (&["scene"], 1),
            Tool::DescribeCameraMotion => (&["recon"], 1),
            Tool::SynthesizeNovelView => (&["recon", "new_camera_pose"], 2),
            Tool::RotateRight | Tool::RotateLeft => (&["extrinsic", "angle"], 1),
            Tool::MoveForward | Tool::MoveBackward => (&["extrinsic", "distance"], 1),
            Tool::TurnAround => (&["extrinsic"], 1),
            Tool::EstimateDepth => (&["image"], 1),
        }
    }
}

pub struct ReconValue {
    pub bundle: Arc<ReconstructionBundle>,
    pub extrinsics: ListRef,
    pub intrinsics: ListRef,
    pub cloud: OnceCell<Rc<PointCloud>>,
}

#[derive(Debug)]
pub enum ImageSource {
    /// Index into the scene's input images.
    Input(usize),
    /// Z-buffer depth of a rendered view, `INFINITY` where uncovered.
    Rendered(Vec<f64>),
}

#[derive(Debug)]
pub struct ImageValue {
    pub rgb: RgbImage,
    pub source: ImageSource,
}

#[derive(Debug)]
pub struct DepthValue {
    pub width: u32,
    pub height: u32,
    /// `NaN` marks pixels without depth.
    pub values: Vec<f64>,
}

#[derive(Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    List(ListRef),
    Range { start: i64, stop: i64, step: i64 },
    Scene,
    Recon(Rc<ReconValue>),
    Pose(ExtrinsicPose),
    Intrinsics(Intrinsics),
    Cloud(Rc<PointCloud>),
    Image(Rc<ImageValue>),
    Depth(Rc<DepthValue>),
    Module,
    Builtin(Builtin),
    Append(ListRef),
}

impl Value {
    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "None",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Range { .. } => "range",
            Value::Scene => "scene",
            Value::Recon(_) => "reconstruction",
            Value::Pose(_) => "pose",
            Value::Intrinsics(_) => "intrinsics",
            Value::Cloud(_) => "point_cloud",
            Value::Image(_) => "image",
            Value::Depth(_) => "depth",
            Value::Module => "module",
            Value::Builtin(_) | Value::Append(_) => "function",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Float(x) => *x != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.borrow().is_empty(),
            Value::Range { .. } => range_len(self) > 0,
            _ => true,
        }
    }

    /// Python `==`.
    pub fn equals(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::None, Value::None) => true,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => {
                Rc::ptr_eq(a, b) || {
                    let (a, b) = (a.borrow(), b.borrow());
                    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.equals(y))
                }
            }
            (Value::Range { .. }, Value::Range { .. }) => {
                let (n, m) = (range_len(self), range_len(other));
                n == m && (n == 0 || (range_get(self, 0) == range_get(other, 0) && (n == 1 || range_step(self) == range_step(other))))
            }
            (Value::Scene, Value::Scene) | (Value::Module, Value::Module) => true,
            (Value::Recon(a), Value::Recon(b)) => Rc::ptr_eq(a, b),
            (Value::Pose(a), Value::Pose(b)) => a == b,
            (Value::Intrinsics(a), Value::Intrinsics(b)) => a == b,
            (Value::Cloud(a), Value::Cloud(b)) => Rc::ptr_eq(a, b),
            (Value::Image(a), Value::Image(b)) => Rc::ptr_eq(a, b),
            (Value::Depth(a), Value::Depth(b)) => Rc::ptr_eq(a, b),
            (Value::Builtin(a), Value::Builtin(b)) => a == b,
            (Value::Append(a), Value::Append(b)) => Rc::ptr_eq(a, b),
            (a, b) => match (a.as_number(), b.as_number()) {
                (Some(x), Some(y)) => x.equals(y),
                _ => false,
            },
        }
    }

    pub fn as_number(&self) -> Option<Number> {
        match self {
            Value::Bool(b) => Some(Number::Int(*b as i64)),
            Value::Int(i) => Some(Number::Int(*i)),
            Value::Float(x) => Some(Number::Float(*x)),
            _ => None,
        }
    }

    /// `str()` rendering: strings are bare, everything else as `repr`.
    pub fn display(&self) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            other => other.repr(),
        }
    }

    pub fn repr(&self) -> String {
        let mut out = String::new();
        self.write_repr(&mut out, 0);
        out
    }

    fn write_repr(&self, out: &mut String, depth: usize) {
        match self {
            Value::None => out.push_str("None"),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Int(i) => write!(out, "{i}").unwrap(),
            Value::Float(x) => out.push_str(&float_repr(*x)),
            Value::Str(s) => out.push_str(&str_repr(s)),
            Value::List(items) => {
                if depth > 16 {
                    out.push_str("[...]");
                    return;
                }
                out.push('[');
                for (i, v) in items.borrow().iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.write_repr(out, depth + 1);
                }
                out.push(']');
            }
            Value::Range { start, stop, step } if *step == 1 => write!(out, "range({start}, {stop})").unwrap(),
            Value::Range { start, stop, step } => write!(out, "range({start}, {stop}, {step})").unwrap(),
            Value::Scene => out.push_str("Scene"),
            Value::Recon(r) => {
                write!(out, "Reconstruction(frames={}, units={})", r.bundle.len(), r.bundle.units()).unwrap()
            }
            Value::Pose(p) => {
                let c = camera_center(p);
                let f = p.forward();
                write!(
                    out,
                    "Pose(center=[{:.3}, {:.3}, {:.3}], forward=[{:.3}, {:.3}, {:.3}])",
                    c.x, c.y, c.z, f.x, f.y, f.z
                )
                .unwrap()
            }
            Value::Intrinsics(k) => {
                write!(out, "Intrinsics(fx={:.3}, fy={:.3}, cx={:.3}, cy={:.3})", k.fx, k.fy, k.cx, k.cy).unwrap()
            }
            Value::Cloud(c) => write!(out, "PointCloud(points={})", c.len()).unwrap(),
            Value::Image(i) => write!(out, "Image({}x{})", i.rgb.width(), i.rgb.height()).unwrap(),
            Value::Depth(d) => {
                let mut valid: Vec<f64> = d.values.iter().copied().filter(|v| v.is_finite()).collect();
                if valid.is_empty() {
                    write!(out, "DepthMap({}x{}, no valid depth)", d.width, d.height).unwrap();
                } else {
                    valid.sort_by(f64::total_cmp);
                    write!(
                        out,
                        "DepthMap({}x{}, min={:.3}, median={:.3}, max={:.3})",
                        d.width,
                        d.height,
                        valid[0],
                        valid[valid.len() / 2],
                        valid[valid.len() - 1]
                    )
                    .unwrap()
                }
            }
            Value::Module => out.push_str("<module pySpatial>"),
            Value::Builtin(Builtin::Range) => out.push_str("<built-in function range>"),
            Value::Builtin(Builtin::Len) => out.push_str("<built-in function len>"),
            Value::Builtin(Builtin::Tool(t)) => write!(out, "<function pySpatial.{}>", t.name()).unwrap(),
            Value::Append(_) => out.push_str("<built-in method append>"),
        }
    }

    /// Compact description for trace records.
    pub fn summary(&self) -> String {
        match self {
            Value::None | Value::Bool(_) | Value::Int(_) | Value::Float(_) => self.repr(),
            Value::Str(s) if s.chars().count() <= 24 => str_repr(s),
            Value::Str(s) => format!("str[{}]", s.chars().count()),
            Value::List(l) => format!("list[{}]", l.borrow().len()),
            Value::Image(i) => format!("image {}x{}", i.rgb.width(), i.rgb.height()),
            other => other.type_name().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    pub fn as_f64(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Float(x) => x,
        }
    }

    fn equals(self, other: Number) -> bool {
        match (self, other) {
            (Number::Int(a), Number::Int(b)) => a == b,
            (a, b) => a.as_f64() == b.as_f64(),
        }
    }
}

pub fn float_repr(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x}");
    if s.contains('.') || s.contains('e') {
        return s;
    }
    if s.trim_start_matches('-').len() > 16 {
        return format!("{x:e}");
    }
    s + ".0"
}

pub fn str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::new();
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

fn range_step(v: &Value) -> i64 {
    match v {
        Value::Range { step, .. } => *step,
        _ => 1,
    }
}

pub fn range_len(v: &Value) -> i64 {
    let Value::Range { start, stop, step } = *v else { return 0 };
    let (start, stop, step) = (start as i128, stop as i128, step as i128);
    let n = if step > 0 {
        (stop - start + step - 1).div_euclid(step)
    } else {
        (start - stop - step - 1).div_euclid(-step)
    };
    n.clamp(0, i64::MAX as i128) as i64
}

pub fn range_get(v: &Value, i: i64) -> i64 {
    let Value::Range { start, step, .. } = *v else { return 0 };
    start + i * step
}
