//! Tree-walking interpreter with step, loop, image and wall-clock budgets.

use std::cell::{OnceCell, RefCell};
use std::collections::HashMap;
use std::path::PathBuf;
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use spatial_core::geometry::{
    build_point_cloud, describe_camera_motion, move_backward, move_forward, rotate_left, rotate_right, turn_around,
    ExtrinsicPose, PointCloudOptions, DEFAULT_MOVE_DISTANCE, DEFAULT_ROTATION_DEG,
};
use spatial_core::recon::{load_bundle, reconstruct_remote, ReconstructionBundle};
use spatial_core::render::{synthesize_novel_view, RenderOptions, DEFAULT_NEAR_CLIP, DEFAULT_POINT_RADIUS};
use spatial_core::scene::Scene;
use thiserror::Error;

use crate::ast::*;
use crate::error::{RuntimeError, RuntimeErrorKind, Span};
use crate::output::{OutputPayload, ProgramOutput, TraceEntry};
use crate::value::*;

/// Longest list or string a program may build.
pub const MAX_SEQUENCE_LEN: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionLimits {
    pub max_steps: u64,
    pub max_rendered_images: u32,
    pub max_loop_iterations: u64,
    pub wall_clock_budget: Duration,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        Self {
            max_steps: 100_000,
            max_rendered_images: 32,
            max_loop_iterations: 10_000,
            wall_clock_budget: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid execution limits: {0}")]
pub struct LimitsError(pub String);

impl ExecutionLimits {
    pub fn validate(&self) -> Result<(), LimitsError> {
        if self.max_steps == 0 || self.max_rendered_images == 0 || self.max_loop_iterations == 0 {
            return Err(LimitsError("step, image and loop limits must be positive".into()));
        }
        if self.wall_clock_budget.is_zero() {
            return Err(LimitsError("wall-clock budget must be positive".into()));
        }
        Ok(())
    }
}

/// Defaults and rendering parameters used by the `pySpatial` tools.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolConfig {
    pub rotation_deg: f64,
    pub move_distance: f64,
    pub point_radius: u32,
    pub near_clip: f64,
    pub background: [f32; 3],
    /// Output size of rendered views; the bundle resolution when `None`.
    pub render_size: Option<(u32, u32)>,
    pub cloud: PointCloudOptions,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            rotation_deg: DEFAULT_ROTATION_DEG,
            move_distance: DEFAULT_MOVE_DISTANCE,
            point_radius: DEFAULT_POINT_RADIUS,
            near_clip: DEFAULT_NEAR_CLIP,
            background: [0.0; 3],
            render_size: None,
            cloud: PointCloudOptions::default(),
        }
    }
}

/// Source of the reconstruction behind `pySpatial.reconstruct`.
pub trait BundleProvider {
    fn reconstruct(&self, scene: &Scene) -> Result<Arc<ReconstructionBundle>, String>;
}

/// Always returns the same bundle.
#[derive(Debug, Clone)]
pub struct FixedBundle(pub Arc<ReconstructionBundle>);

impl BundleProvider for FixedBundle {
    fn reconstruct(&self, _scene: &Scene) -> Result<Arc<ReconstructionBundle>, String> {
        Ok(self.0.clone())
    }
}

/// Loads a bundle directory on first use.
#[derive(Debug, Clone)]
pub struct BundleDir(pub PathBuf);

impl BundleProvider for BundleDir {
    fn reconstruct(&self, _scene: &Scene) -> Result<Arc<ReconstructionBundle>, String> {
        load_bundle(&self.0).map(Arc::new).map_err(|e| e.to_string())
    }
}

/// Posts the scene's images to a reconstruction service.
#[derive(Debug, Clone)]
pub struct RemoteService {
    pub endpoint: String,
    pub timeout: Duration,
}

impl BundleProvider for RemoteService {
    fn reconstruct(&self, scene: &Scene) -> Result<Arc<ReconstructionBundle>, String> {
        reconstruct_remote(scene.image_paths(), &self.endpoint, self.timeout).map(Arc::new).map_err(|e| e.to_string())
    }
}

impl<F> BundleProvider for F
where
    F: Fn(&Scene) -> Result<Arc<ReconstructionBundle>, String>,
{
    fn reconstruct(&self, scene: &Scene) -> Result<Arc<ReconstructionBundle>, String> {
        self(scene)
    }
}

/// Runs `program(scene)` and classifies the return value.
pub fn execute(
    program: &Program,
    scene: &Scene,
    provider: &dyn BundleProvider,
    limits: &ExecutionLimits,
    tools: &ToolConfig,
) -> Result<ProgramOutput, RuntimeError> {
    let mut ex = Exec {
        scene,
        provider,
        limits,
        tools,
        steps: 0,
        start: Instant::now(),
        trace: Vec::new(),
        rendered: 0,
        locals: HashMap::new(),
        recon: None,
        scene_images: None,
    };
    if let Err(e) = limits.validate() {
        return Err(RuntimeError {
            kind: RuntimeErrorKind::StepLimit,
            span: program.entry.span,
            message: e.to_string(),
            trace: Vec::new(),
        });
    }
    ex.locals.insert(program.entry.param.name.clone(), Value::Scene);
    let result = ex.step(program.entry.span).and_then(|_| ex.block(&program.entry.body));
    match result {
        Ok(ret) => Ok(ProgramOutput {
            payload: classify(&ret.unwrap_or(Value::None)),
            trace: ex.trace,
            comments: program.comments.iter().map(|c| c.text.clone()).collect(),
        }),
        Err(f) => Err(RuntimeError { kind: f.kind, span: f.span, message: f.message, trace: ex.trace }),
    }
}

/// string → text, image → image, non-empty list of images → image list,
/// anything else → its text rendering.
pub fn classify(v: &Value) -> OutputPayload {
    match v {
        Value::Str(s) => OutputPayload::Text(s.to_string()),
        Value::Image(i) => OutputPayload::Image(i.rgb.clone()),
        Value::List(items) => {
            let items = items.borrow();
            if !items.is_empty() && items.iter().all(|v| matches!(v, Value::Image(_))) {
                OutputPayload::Images(
                    items
                        .iter()
                        .map(|v| match v {
                            Value::Image(i) => i.rgb.clone(),
                            _ => unreachable!(),
                        })
                        .collect(),
                )
            } else {
                OutputPayload::Text(v.repr())
            }
        }
        other => OutputPayload::Text(other.repr()),
    }
}

struct Fault {
    kind: RuntimeErrorKind,
    span: Span,
    message: String,
}

type R<T> = Result<T, Fault>;

fn fault<T>(kind: RuntimeErrorKind, span: Span, message: impl Into<String>) -> R<T> {
    Err(Fault { kind, span, message: message.into() })
}

use RuntimeErrorKind as K;

struct Exec<'a> {
    scene: &'a Scene,
    provider: &'a dyn BundleProvider,
    limits: &'a ExecutionLimits,
    tools: &'a ToolConfig,
    steps: u64,
    start: Instant,
    trace: Vec<TraceEntry>,
    rendered: u32,
    locals: HashMap<String, Value>,
    recon: Option<Rc<ReconValue>>,
    scene_images: Option<ListRef>,
}

impl Exec<'_> {
    fn step(&mut self, span: Span) -> R<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return fault(K::StepLimit, span, format!("exceeded {} steps", self.limits.max_steps));
        }
        self.check_clock(span)
    }

    fn check_clock(&self, span: Span) -> R<()> {
        if self.start.elapsed() > self.limits.wall_clock_budget {
            return fault(K::WallClock, span, format!("exceeded the {:?} wall-clock budget", self.limits.wall_clock_budget));
        }
        Ok(())
    }

    fn block(&mut self, body: &[Stmt]) -> R<Option<Value>> {
        for s in body {
            if let Some(v) = self.stmt(s)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn stmt(&mut self, s: &Stmt) -> R<Option<Value>> {
        self.step(s.span)?;
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let v = self.eval(value)?;
                self.assign(target, v, s.span)?;
            }
            StmtKind::AnnAssign { target, value, .. } => {
                if let Some(value) = value {
                    let v = self.eval(value)?;
                    self.locals.insert(target.clone(), v);
                }
            }
            StmtKind::AugAssign { target, op, value } => self.aug_assign(target, *op, value, s.span)?,
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::For { var, iter, body } => return self.for_loop(var, iter, body, s.span),
            StmtKind::If { branches, orelse } => {
                for (cond, body) in branches {
                    if self.eval(cond)?.truthy() {
                        return self.block(body);
                    }
                }
                if let Some(body) = orelse {
                    return self.block(body);
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::None,
                };
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn for_loop(&mut self, var: &str, iter: &Expr, body: &[Stmt], span: Span) -> R<Option<Value>> {
        let seq = self.eval(iter)?;
        let len_now = |seq: &Value| match seq {
            Value::Range { .. } => range_len(seq),
            Value::List(l) => l.borrow().len() as i64,
            _ => 0,
        };
        if !matches!(seq, Value::Range { .. } | Value::List(_)) {
            return fault(K::TypeMismatch, iter.span, format!("cannot iterate over {}", seq.type_name()));
        }
        let mut i: i64 = 0;
        while i < len_now(&seq) {
            if i as u64 >= self.limits.max_loop_iterations {
                return fault(
                    K::StepLimit,
                    span,
                    format!("for loop exceeded {} iterations", self.limits.max_loop_iterations),
                );
            }
            let item = match &seq {
                Value::Range { .. } => Value::Int(range_get(&seq, i)),
                Value::List(l) => l.borrow()[i as usize].clone(),
                _ => unreachable!(),
            };
            self.step(span)?;
            self.locals.insert(var.to_string(), item);
            if let Some(v) = self.block(body)? {
                return Ok(Some(v));
            }
            i += 1;
        }
        Ok(None)
    }

    fn assign(&mut self, target: &Target, v: Value, span: Span) -> R<()> {
        match target {
            Target::Name(n) => {
                self.locals.insert(n.clone(), v);
                Ok(())
            }
            Target::Index { object, index } => {
                let obj = self.eval(object)?;
                let idx = self.eval(index)?;
                self.set_item(&obj, &idx, v, span)
            }
        }
    }

    fn aug_assign(&mut self, target: &Target, op: BinOp, value: &Expr, span: Span) -> R<()> {
        match target {
            Target::Name(n) => {
                let cur = self.lookup(n, span)?;
                let rhs = self.eval(value)?;
                if let (BinOp::Add, Value::List(l)) = (op, &cur) {
                    // `+=` extends a list in place.
                    let extra = iterable_items(&rhs).ok_or(()).or_else(|_| {
                        fault(K::TypeMismatch, value.span, format!("can only extend a list with a list, not {}", rhs.type_name()))
                    })?;
                    if l.borrow().len() + extra.len() > MAX_SEQUENCE_LEN {
                        return fault(K::ValueTooLarge, span, "list grew past the size limit");
                    }
                    l.borrow_mut().extend(extra);
                    return Ok(());
                }
                let v = binary(op, &cur, &rhs).or_else(|(k, m)| fault(k, span, m))?;
                self.locals.insert(n.clone(), v);
                Ok(())
            }
            Target::Index { object, index } => {
                let obj = self.eval(object)?;
                let idx = self.eval(index)?;
                let cur = self.get_item(&obj, &idx, span)?;
                let rhs = self.eval(value)?;
                let v = binary(op, &cur, &rhs).or_else(|(k, m)| fault(k, span, m))?;
                self.set_item(&obj, &idx, v, span)
            }
        }
    }

    fn lookup(&self, name: &str, span: Span) -> R<Value> {
        if let Some(v) = self.locals.get(name) {
            return Ok(v.clone());
        }
        match name {
            "pySpatial" => Ok(Value::Module),
            "range" => Ok(Value::Builtin(Builtin::Range)),
            "len" => Ok(Value::Builtin(Builtin::Len)),
            _ => fault(K::UnknownName, span, format!("name '{name}' is used before it is assigned")),
        }
    }

    fn eval(&mut self, e: &Expr) -> R<Value> {
        let span = e.span;
        Ok(match &e.kind {
            ExprKind::Int(i) => Value::Int(*i),
            ExprKind::Float(x) => Value::Float(*x),
            ExprKind::Str(s) => Value::str(s),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::None => Value::None,
            ExprKind::Name(n) => self.lookup(n, span)?,
            ExprKind::List(items) => {
                let vals = items.iter().map(|i| self.eval(i)).collect::<R<Vec<_>>>()?;
                Value::list(vals)
            }
            ExprKind::Attribute { object, name } => {
                let obj = self.eval(object)?;
                self.attribute(&obj, name, span)?
            }
            ExprKind::Index { object, index } => {
                let obj = self.eval(object)?;
                let idx = self.eval(index)?;
                self.get_item(&obj, &idx, span)?
            }
            ExprKind::Call { func, args, kwargs } => {
                let f = self.eval(func)?;
                let args = args.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?;
                let kwargs =
                    kwargs.iter().map(|(k, v)| Ok((k.clone(), self.eval(v)?))).collect::<R<Vec<(String, Value)>>>()?;
                self.step(span)?;
                self.call(&f, args, kwargs, span)?
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                match op {
                    UnaryOp::Not => Value::Bool(!v.truthy()),
                    UnaryOp::Pos => match v.as_number() {
                        Some(Number::Int(i)) => Value::Int(i),
                        Some(Number::Float(x)) => Value::Float(x),
                        None => return fault(K::TypeMismatch, span, format!("bad operand type for unary +: {}", v.type_name())),
                    },
                    UnaryOp::Neg => match v.as_number() {
                        Some(Number::Int(i)) => match i.checked_neg() {
                            Some(n) => Value::Int(n),
                            None => return fault(K::ValueTooLarge, span, "integer overflow"),
                        },
                        Some(Number::Float(x)) => Value::Float(-x),
                        None => return fault(K::TypeMismatch, span, format!("bad operand type for unary -: {}", v.type_name())),
                    },
                }
            }
            ExprKind::Binary { op, left, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                binary(*op, &l, &r).or_else(|(k, m)| fault(k, span, m))?
            }
            ExprKind::Compare { first, rest } => {
                let mut left = self.eval(first)?;
                for (op, right) in rest {
                    let right = self.eval(right)?;
                    if !compare(*op, &left, &right).or_else(|(k, m)| fault(k, span, m))? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            ExprKind::BoolOp { op, values } => {
                let mut last = Value::None;
                for v in values {
                    last = self.eval(v)?;
                    let stop = match op {
                        BoolOp::And => !last.truthy(),
                        BoolOp::Or => last.truthy(),
                    };
                    if stop {
                        break;
                    }
                }
                last
            }
        })
    }

    fn attribute(&mut self, obj: &Value, name: &str, span: Span) -> R<Value> {
        match (obj, name) {
            (Value::Module, _) => match Tool::from_name(name) {
                Some(t) => Ok(Value::Builtin(Builtin::Tool(t))),
                None => fault(K::UnknownName, span, format!("pySpatial has no function '{name}'")),
            },
            (Value::Scene, "images") => Ok(Value::List(self.scene_images())),
            (Value::Scene, "question") => Ok(Value::str(self.scene.question())),
            (Value::Recon(r), "extrinsics") => Ok(Value::List(r.extrinsics.clone())),
            (Value::Recon(r), "intrinsics") => Ok(Value::List(r.intrinsics.clone())),
            (Value::Recon(r), "point_cloud") => self.cloud_of(r, span).map(Value::Cloud),
            (Value::List(l), "append") => Ok(Value::Append(l.clone())),
            _ => fault(K::UnknownName, span, format!("'{}' object has no attribute '{name}'", obj.type_name())),
        }
    }

    fn scene_images(&mut self) -> ListRef {
        self.scene_images
            .get_or_insert_with(|| {
                Rc::new(RefCell::new(
                    self.scene
                        .images()
                        .iter()
                        .enumerate()
                        .map(|(i, rgb)| Value::Image(Rc::new(ImageValue { rgb: rgb.clone(), source: ImageSource::Input(i) })))
                        .collect(),
                ))
            })
            .clone()
    }

    fn get_item(&self, obj: &Value, idx: &Value, span: Span) -> R<Value> {
        let i = match idx {
            Value::Int(i) => *i,
            Value::Bool(b) => *b as i64,
            other => {
                return fault(K::TypeMismatch, span, format!("indices must be integers, not {}", other.type_name()))
            }
        };
        let resolve = |len: usize| -> R<usize> {
            let j = if i < 0 { i + len as i64 } else { i };
            if j < 0 || j >= len as i64 {
                return fault(K::IndexOutOfRange, span, format!("index {i} is out of range for length {len}"));
            }
            Ok(j as usize)
        };
        match obj {
            Value::List(l) => {
                let l = l.borrow();
                Ok(l[resolve(l.len())?].clone())
            }
            Value::Str(s) => {
                let n = s.chars().count();
                let j = resolve(n)?;
                Ok(Value::str(&s.chars().nth(j).expect("in range").to_string()))
            }
            Value::Range { .. } => {
                let n = range_len(obj);
                let j = if i < 0 { i + n } else { i };
                if j < 0 || j >= n {
                    return fault(K::IndexOutOfRange, span, format!("range index {i} is out of range"));
                }
                Ok(Value::Int(range_get(obj, j)))
            }
            other => fault(K::TypeMismatch, span, format!("'{}' object is not subscriptable", other.type_name())),
        }
    }

    fn set_item(&self, obj: &Value, idx: &Value, v: Value, span: Span) -> R<()> {
        let Value::List(l) = obj else {
            return fault(K::TypeMismatch, span, format!("'{}' object does not support item assignment", obj.type_name()));
        };
        let i = match idx {
            Value::Int(i) => *i,
            Value::Bool(b) => *b as i64,
            other => {
                return fault(K::TypeMismatch, span, format!("indices must be integers, not {}", other.type_name()))
            }
        };
        let mut l = l.borrow_mut();
        let len = l.len() as i64;
        let j = if i < 0 { i + len } else { i };
        if j < 0 || j >= len {
            return fault(K::IndexOutOfRange, span, format!("index {i} is out of range for length {len}"));
        }
        l[j as usize] = v;
        Ok(())
    }

    fn call(&mut self, f: &Value, args: Vec<Value>, kwargs: Vec<(String, Value)>, span: Span) -> R<Value> {
        match f {
            Value::Builtin(Builtin::Range) => {
                no_kwargs("range", &kwargs, span)?;
                let ints = args
                    .iter()
                    .map(|a| match a.as_number() {
                        Some(Number::Int(i)) => Ok(i),
                        _ => fault(K::TypeMismatch, span, format!("range() arguments must be integers, not {}", a.type_name())),
                    })
                    .collect::<R<Vec<i64>>>()?;
                let (start, stop, step) = match ints.as_slice() {
                    [stop] => (0, *stop, 1),
                    [start, stop] => (*start, *stop, 1),
                    [start, stop, step] => (*start, *stop, *step),
                    _ => return fault(K::TypeMismatch, span, format!("range() takes 1 to 3 arguments, got {}", ints.len())),
                };
                if step == 0 {
                    return fault(K::TypeMismatch, span, "range() step must not be zero");
                }
                Ok(Value::Range { start, stop, step })
            }
            Value::Builtin(Builtin::Len) => {
                no_kwargs("len", &kwargs, span)?;
                let [v] = args.as_slice() else {
                    return fault(K::TypeMismatch, span, format!("len() takes exactly one argument, got {}", args.len()));
                };
                match v {
                    Value::List(l) => Ok(Value::Int(l.borrow().len() as i64)),
                    Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                    Value::Range { .. } => Ok(Value::Int(range_len(v))),
                    other => fault(K::TypeMismatch, span, format!("object of type {} has no len()", other.type_name())),
                }
            }
            Value::Append(l) => {
                no_kwargs("append", &kwargs, span)?;
                let [v] = <[Value; 1]>::try_from(args).map_err(|a| Fault {
                    kind: K::TypeMismatch,
                    span,
                    message: format!("append() takes exactly one argument, got {}", a.len()),
                })?;
                if l.borrow().len() >= MAX_SEQUENCE_LEN {
                    return fault(K::ValueTooLarge, span, "list grew past the size limit");
                }
                l.borrow_mut().push(v);
                Ok(Value::None)
            }
            Value::Builtin(Builtin::Tool(tool)) => {
                let summary = summarize_args(&args, &kwargs);
                let result = self.tool(*tool, args, kwargs, span);
                self.trace.push(TraceEntry {
                    step: self.steps,
                    call: format!("pySpatial.{}", tool.name()),
                    args_summary: summary,
                    output_kind: match &result {
                        Ok(v) => v.type_name().to_string(),
                        Err(_) => "error".to_string(),
                    },
                });
                result
            }
            other => fault(K::TypeMismatch, span, format!("'{}' object is not callable", other.type_name())),
        }
    }

    fn tool(&mut self, tool: Tool, args: Vec<Value>, kwargs: Vec<(String, Value)>, span: Span) -> R<Value> {
        let bound = bind(tool, args, kwargs, span)?;
        let arg = |i: usize| bound[i].as_ref();
        match tool {
            Tool::Reconstruct => {
                expect_kind(arg(0), "scene", |v| matches!(v, Value::Scene), span)?;
                self.recon(span).map(Value::Recon)
            }
            Tool::DescribeCameraMotion => {
                let r = as_recon(arg(0), span)?;
                let poses = poses_of(&r.extrinsics, span)?;
                describe_camera_motion(&poses, r.bundle.units())
                    .map(|s| Value::str(&s))
                    .or_else(|e| fault(K::ToolFailure, span, e.to_string()))
            }
            Tool::SynthesizeNovelView => {
                let r = as_recon(arg(0), span)?;
                let pose = as_pose(arg(1), span)?;
                if self.rendered >= self.limits.max_rendered_images {
                    return fault(
                        K::ImageBudget,
                        span,
                        format!("more than {} rendered images", self.limits.max_rendered_images),
                    );
                }
                let cloud = self.cloud_of(&r, span)?;
                let k = r.bundle.frames()[0].intrinsics;
                let (width, height) = self.tools.render_size.unwrap_or((k.width, k.height));
                let opts = RenderOptions {
                    width,
                    height,
                    point_radius: self.tools.point_radius,
                    near_clip: self.tools.near_clip,
                    background: self.tools.background,
                };
                let img = synthesize_novel_view(&cloud, &pose, &k, &opts)
                    .or_else(|e| fault(K::ToolFailure, span, e.to_string()))?;
                self.rendered += 1;
                self.check_clock(span)?;
                Ok(Value::Image(Rc::new(ImageValue { rgb: img.to_rgb8(), source: ImageSource::Rendered(img.depth) })))
            }
            Tool::RotateRight | Tool::RotateLeft => {
                let pose = as_pose(arg(0), span)?;
                let angle = number_or(arg(1), self.tools.rotation_deg, "angle", span)?;
                Ok(Value::Pose(if tool == Tool::RotateRight { rotate_right(&pose, angle) } else { rotate_left(&pose, angle) }))
            }
            Tool::MoveForward | Tool::MoveBackward => {
                let pose = as_pose(arg(0), span)?;
                let d = number_or(arg(1), self.tools.move_distance, "distance", span)?;
                let moved = if tool == Tool::MoveForward { move_forward(&pose, d) } else { move_backward(&pose, d) };
                moved.map(Value::Pose).or_else(|e| fault(K::ToolFailure, span, e.to_string()))
            }
            Tool::TurnAround => Ok(Value::Pose(turn_around(&as_pose(arg(0), span)?))),
            Tool::EstimateDepth => {
                let Some(Value::Image(img)) = arg(0) else {
                    return fault(K::TypeMismatch, span, format!("estimate_depth expects an image, got {}", kind_of(arg(0))));
                };
                let (w, h) = img.rgb.dimensions();
                let values = match &img.source {
                    ImageSource::Rendered(depth) => depth.iter().map(|d| if d.is_finite() { *d } else { f64::NAN }).collect(),
                    ImageSource::Input(i) => {
                        let r = self.recon(span)?;
                        let Some(frame) = r.bundle.frames().get(*i) else {
                            return fault(
                                K::ToolFailure,
                                span,
                                format!("reconstruction has {} frames, no depth for image {i}", r.bundle.len()),
                            );
                        };
                        let d = &frame.depth;
                        (0..d.height())
                            .flat_map(|y| (0..d.width()).map(move |x| (x, y)))
                            .map(|(x, y)| d.get(x, y).map_or(f64::NAN, f64::from))
                            .collect()
                    }
                };
                let (width, height) = match &img.source {
                    ImageSource::Rendered(_) => (w, h),
                    ImageSource::Input(i) => {
                        let f = &self.recon.as_ref().expect("reconstructed above").bundle.frames()[*i];
                        (f.depth.width(), f.depth.height())
                    }
                };
                Ok(Value::Depth(Rc::new(DepthValue { width, height, values })))
            }
        }
    }

    fn recon(&mut self, span: Span) -> R<Rc<ReconValue>> {
        if let Some(r) = &self.recon {
            return Ok(r.clone());
        }
        let bundle = self.provider.reconstruct(self.scene).or_else(|e| fault(K::Reconstruction, span, e))?;
        self.check_clock(span)?;
        let extrinsics = bundle.frames().iter().map(|f| Value::Pose(f.pose)).collect();
        let intrinsics = bundle.frames().iter().map(|f| Value::Intrinsics(f.intrinsics)).collect();
        let r = Rc::new(ReconValue {
            bundle,
            extrinsics: Rc::new(RefCell::new(extrinsics)),
            intrinsics: Rc::new(RefCell::new(intrinsics)),
            cloud: OnceCell::new(),
        });
        self.recon = Some(r.clone());
        Ok(r)
    }

    fn cloud_of(&self, r: &ReconValue, span: Span) -> R<Rc<spatial_core::geometry::PointCloud>> {
        if let Some(c) = r.cloud.get() {
            return Ok(c.clone());
        }
        let cloud = build_point_cloud(&r.bundle, &self.tools.cloud).or_else(|e| fault(K::ToolFailure, span, e.to_string()))?;
        Ok(r.cloud.get_or_init(|| Rc::new(cloud)).clone())
    }
}

fn no_kwargs(name: &str, kwargs: &[(String, Value)], span: Span) -> R<()> {
    match kwargs.first() {
        Some((k, _)) => fault(K::TypeMismatch, span, format!("{name}() got an unexpected keyword argument '{k}'")),
        None => Ok(()),
    }
}

fn bind(tool: Tool, args: Vec<Value>, kwargs: Vec<(String, Value)>, span: Span) -> R<Vec<Option<Value>>> {
    let (names, required) = tool.params();
    let name = tool.name();
    if args.len() > names.len() {
        return fault(
            K::TypeMismatch,
            span,
            format!("{name}() takes at most {} arguments, got {}", names.len(), args.len()),
        );
    }
    let mut bound: Vec<Option<Value>> = vec![None; names.len()];
    for (i, a) in args.into_iter().enumerate() {
        bound[i] = Some(a);
    }
    for (k, v) in kwargs {
        let Some(i) = names.iter().position(|n| *n == k) else {
            return fault(K::TypeMismatch, span, format!("{name}() got an unexpected keyword argument '{k}'"));
        };
        if bound[i].is_some() {
            return fault(K::TypeMismatch, span, format!("{name}() got multiple values for argument '{k}'"));
        }
        bound[i] = Some(v);
    }
    if let Some(missing) = (0..required).find(|&i| bound[i].is_none()) {
        return fault(K::TypeMismatch, span, format!("{name}() missing required argument '{}'", names[missing]));
    }
    Ok(bound)
}

fn kind_of(v: Option<&Value>) -> &'static str {
    v.map_or("nothing", Value::type_name)
}

fn expect_kind(v: Option<&Value>, want: &str, ok: impl Fn(&Value) -> bool, span: Span) -> R<()> {
    match v {
        Some(v) if ok(v) => Ok(()),
        other => fault(K::TypeMismatch, span, format!("expected {want}, got {}", kind_of(other))),
    }
}

fn as_recon(v: Option<&Value>, span: Span) -> R<Rc<ReconValue>> {
    match v {
        Some(Value::Recon(r)) => Ok(r.clone()),
        other => fault(K::TypeMismatch, span, format!("expected a reconstruction, got {}", kind_of(other))),
    }
}

fn as_pose(v: Option<&Value>, span: Span) -> R<ExtrinsicPose> {
    match v {
        Some(Value::Pose(p)) => Ok(*p),
        other => fault(K::TypeMismatch, span, format!("expected a camera pose, got {}", kind_of(other))),
    }
}

fn number_or(v: Option<&Value>, default: f64, what: &str, span: Span) -> R<f64> {
    let Some(v) = v else { return Ok(default) };
    match v.as_number() {
        Some(n) if n.as_f64().is_finite() => Ok(n.as_f64()),
        Some(_) => fault(K::ToolFailure, span, format!("{what} must be finite")),
        None => fault(K::TypeMismatch, span, format!("{what} must be a number, got {}", v.type_name())),
    }
}

fn poses_of(list: &ListRef, span: Span) -> R<Vec<ExtrinsicPose>> {
    list.borrow()
        .iter()
        .map(|v| match v {
            Value::Pose(p) => Ok(*p),
            other => fault(K::TypeMismatch, span, format!("extrinsics must hold poses, found {}", other.type_name())),
        })
        .collect()
}

fn summarize_args(args: &[Value], kwargs: &[(String, Value)]) -> String {
    args.iter()
        .map(Value::summary)
        .chain(kwargs.iter().map(|(k, v)| format!("{k}={}", v.summary())))
        .collect::<Vec<_>>()
        .join(", ")
}

fn iterable_items(v: &Value) -> Option<Vec<Value>> {
    match v {
        Value::List(l) => Some(l.borrow().clone()),
        Value::Range { .. } if range_len(v) <= MAX_SEQUENCE_LEN as i64 => {
            Some((0..range_len(v)).map(|i| Value::Int(range_get(v, i))).collect())
        }
        _ => None,
    }
}

type OpResult<T> = Result<T, (RuntimeErrorKind, String)>;

fn too_large<T>() -> OpResult<T> {
    Err((K::ValueTooLarge, "value exceeds the interpreter's size limit".into()))
}

fn repeat_count(n: i64, unit: usize) -> OpResult<usize> {
    let n = n.max(0) as u128;
    if n * unit as u128 > MAX_SEQUENCE_LEN as u128 {
        return too_large();
    }
    Ok(n as usize)
}

pub(crate) fn binary(op: BinOp, l: &Value, r: &Value) -> OpResult<Value> {
    let mismatch = || {
        Err((
            K::TypeMismatch,
            format!("unsupported operand types for {}: {} and {}", op.symbol(), l.type_name(), r.type_name()),
        ))
    };
    match (op, l, r) {
        (BinOp::Add, Value::Str(a), Value::Str(b)) => {
            if a.len() + b.len() > MAX_SEQUENCE_LEN {
                return too_large();
            }
            return Ok(Value::str(&format!("{a}{b}")));
        }
        (BinOp::Add, Value::List(a), Value::List(b)) => {
            let mut v = a.borrow().clone();
            if v.len() + b.borrow().len() > MAX_SEQUENCE_LEN {
                return too_large();
            }
            v.extend(b.borrow().iter().cloned());
            return Ok(Value::list(v));
        }
        (BinOp::Mul, Value::Str(s), n) | (BinOp::Mul, n, Value::Str(s)) if matches!(n, Value::Int(_) | Value::Bool(_)) => {
            let Some(Number::Int(n)) = n.as_number() else { unreachable!() };
            let count = repeat_count(n, s.len().max(1))?;
            return Ok(Value::str(&s.repeat(count)));
        }
        (BinOp::Mul, Value::List(l), n) | (BinOp::Mul, n, Value::List(l)) if matches!(n, Value::Int(_) | Value::Bool(_)) => {
            let Some(Number::Int(n)) = n.as_number() else { unreachable!() };
            let items = l.borrow();
            let count = repeat_count(n, items.len().max(1))?;
            let mut out = Vec::with_capacity(items.len() * count);
            for _ in 0..count {
                out.extend(items.iter().cloned());
            }
            return Ok(Value::list(out));
        }
        _ => {}
    }
    let (Some(a), Some(b)) = (l.as_number(), r.as_number()) else {
        return mismatch();
    };
    arith(op, a, b)
}

fn arith(op: BinOp, a: Number, b: Number) -> OpResult<Value> {
    let zero = || Err((K::ZeroDivision, "division by zero".to_string()));
    let overflow = || Err((K::ValueTooLarge, "integer overflow".to_string()));
    if let (Number::Int(x), Number::Int(y)) = (a, b) {
        return match op {
            BinOp::Add => x.checked_add(y).map(Value::Int).map_or_else(overflow, Ok),
            BinOp::Sub => x.checked_sub(y).map(Value::Int).map_or_else(overflow, Ok),
            BinOp::Mul => x.checked_mul(y).map(Value::Int).map_or_else(overflow, Ok),
            BinOp::Div if y == 0 => zero(),
            BinOp::Div => Ok(Value::Float(x as f64 / y as f64)),
            BinOp::FloorDiv | BinOp::Mod if y == 0 => zero(),
            BinOp::FloorDiv => {
                let (q, r) = (x.wrapping_div(y), x.wrapping_rem(y));
                if x == i64::MIN && y == -1 {
                    return overflow();
                }
                Ok(Value::Int(if r != 0 && ((r < 0) != (y < 0)) { q - 1 } else { q }))
            }
            BinOp::Mod => {
                if y == -1 {
                    return Ok(Value::Int(0));
                }
                let r = x % y;
                Ok(Value::Int(if r != 0 && ((r < 0) != (y < 0)) { r + y } else { r }))
            }
            BinOp::Pow if y < 0 => {
                if x == 0 {
                    return zero();
                }
                Ok(Value::Float((x as f64).powf(y as f64)))
            }
            BinOp::Pow => u32::try_from(y)
                .ok()
                .and_then(|e| x.checked_pow(e))
                .map(Value::Int)
                .map_or_else(overflow, Ok),
        };
    }
    let (x, y) = (a.as_f64(), b.as_f64());
    Ok(Value::Float(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div if y == 0.0 => return zero(),
        BinOp::Div => x / y,
        BinOp::FloorDiv if y == 0.0 => return zero(),
        BinOp::FloorDiv => (x / y).floor(),
        BinOp::Mod if y == 0.0 => return zero(),
        BinOp::Mod => {
            let r = x % y;
            if r != 0.0 && ((r < 0.0) != (y < 0.0)) {
                r + y
            } else {
                r
            }
        }
        BinOp::Pow if x == 0.0 && y < 0.0 => return zero(),
        BinOp::Pow => x.powf(y),
    }))
}

pub(crate) fn compare(op: CmpOp, l: &Value, r: &Value) -> OpResult<bool> {
    use std::cmp::Ordering;
    let ord = |l: &Value, r: &Value| -> OpResult<Option<Ordering>> {
        match (l, r) {
            (Value::Str(a), Value::Str(b)) => Ok(Some(a.cmp(b))),
            _ => match (l.as_number(), r.as_number()) {
                (Some(Number::Int(a)), Some(Number::Int(b))) => Ok(Some(a.cmp(&b))),
                (Some(a), Some(b)) => Ok(a.as_f64().partial_cmp(&b.as_f64())),
                _ => Err((
                    K::TypeMismatch,
                    format!("'{}' not supported between {} and {}", op.symbol(), l.type_name(), r.type_name()),
                )),
            },
        }
    };
    Ok(match op {
        CmpOp::Eq => l.equals(r),
        CmpOp::Ne => !l.equals(r),
        CmpOp::Lt => ord(l, r)? == Some(Ordering::Less),
        CmpOp::Le => matches!(ord(l, r)?, Some(Ordering::Less | Ordering::Equal)),
        CmpOp::Gt => ord(l, r)? == Some(Ordering::Greater),
        CmpOp::Ge => matches!(ord(l, r)?, Some(Ordering::Greater | Ordering::Equal)),
        CmpOp::In | CmpOp::NotIn => {
            let found = match r {
                Value::List(items) => items.borrow().iter().any(|v| v.equals(l)),
                Value::Str(s) => match l {
                    Value::Str(needle) => s.contains(&**needle),
                    other => {
                        return Err((K::TypeMismatch, format!("'in <str>' requires a string, not {}", other.type_name())))
                    }
                },
                Value::Range { .. } => match l.as_number() {
                    Some(Number::Int(x)) => {
                        let Value::Range { start, step, .. } = *r else { unreachable!() };
                        let offset = x as i128 - start as i128;
                        offset % step as i128 == 0 && {
                            let idx = offset / step as i128;
                            idx >= 0 && idx < range_len(r) as i128
                        }
                    }
                    Some(Number::Float(x)) => x.fract() == 0.0 && compare(CmpOp::In, &Value::Int(x as i64), r)?,
                    None => false,
                },
                other => {
                    return Err((K::TypeMismatch, format!("argument of type {} is not iterable", other.type_name())))
                }
            };
            found == (op == CmpOp::In)
        }
    })
}
