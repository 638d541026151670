//! C ABI for `roomlayout`.
//!
//! Objects are opaque handles created by `rl_*` constructors and released
//! with the matching `rl_*_free`. Every fallible call returns an
//! [`RlStatus`]; on failure a message is available from
//! [`rl_last_error_message`] on the same thread. Output pointers are only
//! written on success. Paths are zero-terminated UTF-8.
//!
//! Handles are not synchronized: share one across threads only for
//! read-only calls.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use roomlayout::{
    average_init, evaluate, synth_field, Catalog, Error, FeatureField, LayoutFile, LayoutState, Method, OptimConfig,
    SynthParams,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidLayout = 5,
    DimensionMismatch = 6,
    BadFormat = 7,
    NonFinite = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlMethod {
    No = 0,
    Pio = 1,
}

fn method_arg(m: u32) -> Result<Method, Fail> {
    match m {
        x if x == RlMethod::No as u32 => Ok(Method::No),
        x if x == RlMethod::Pio as u32 => Ok(Method::Pio),
        _ => Err(Fail(RlStatus::InvalidArgument, format!("unknown method {m}"))),
    }
}

/// Field synthesis settings; see [`rl_synth_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RlSynthParams {
    pub thickness: usize,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub occlusion_count: usize,
    pub occlusion_max_frac: f64,
    pub seed: u64,
}

impl From<RlSynthParams> for SynthParams {
    fn from(p: RlSynthParams) -> Self {
        SynthParams {
            thickness: p.thickness,
            blur_sigma: p.blur_sigma,
            noise_sigma: p.noise_sigma,
            occlusion_count: p.occlusion_count,
            occlusion_max_frac: p.occlusion_max_frac,
            seed: p.seed,
        }
    }
}

/// Optimizer settings; see [`rl_optim_config_default`]. A `gain` of zero
/// means "calibrate from the first sweep".
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RlOptimConfig {
    pub window: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub stop_eps: f64,
    pub max_iters: usize,
    pub thickness: usize,
    pub gain: f64,
}

impl From<RlOptimConfig> for OptimConfig {
    fn from(c: RlOptimConfig) -> Self {
        OptimConfig {
            window: c.window,
            alpha_min: c.alpha_min,
            alpha_max: c.alpha_max,
            stop_eps: c.stop_eps,
            max_iters: c.max_iters,
            thickness: c.thickness,
            gain: (c.gain != 0.0).then_some(c.gain),
            ..OptimConfig::default()
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RlEval {
    pub e_corner: f64,
    pub e_pixel: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RlInferSummary {
    pub topology_id: u32,
    pub final_energy: f64,
    pub iters: usize,
    pub elapsed_secs: f64,
    pub no_progress: bool,
}

/// Topology catalog.
pub struct RlCatalog(Catalog);

/// Four-channel feature field.
pub struct RlField(FeatureField);

/// Layout: topology plus conjunction coordinates.
pub struct RlLayout(LayoutState);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> RlStatus {
    match err {
        Error::Io { .. } => RlStatus::Io,
        Error::Parse(_) | Error::Schema { .. } => RlStatus::Parse,
        Error::InvalidLayout(_) | Error::SelfIntersectingFace { .. } => RlStatus::InvalidLayout,
        Error::InvalidArgument(_) | Error::NoCases(_) => RlStatus::InvalidArgument,
        Error::DimensionMismatch(_) => RlStatus::DimensionMismatch,
        Error::BadMagic(_) | Error::ChannelCount(_) => RlStatus::BadFormat,
        Error::NonFinite { .. } => RlStatus::NonFinite,
    }
}

struct Fail(RlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            RlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RlStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RlStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the last error of this thread, zero-terminated, into `buf`.
///
/// Returns the message length excluding the terminator; if that is not
/// smaller than `len` the message was truncated. `buf` may be null when
/// `len` is zero.
///
/// # Safety
/// `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn rl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub extern "C" fn rl_synth_params_default() -> RlSynthParams {
    let p = SynthParams::default();
    RlSynthParams {
        thickness: p.thickness,
        blur_sigma: p.blur_sigma,
        noise_sigma: p.noise_sigma,
        occlusion_count: p.occlusion_count,
        occlusion_max_frac: p.occlusion_max_frac,
        seed: p.seed,
    }
}

#[no_mangle]
pub extern "C" fn rl_optim_config_default() -> RlOptimConfig {
    let c = OptimConfig::default();
    RlOptimConfig {
        window: c.window,
        alpha_min: c.alpha_min,
        alpha_max: c.alpha_max,
        stop_eps: c.stop_eps,
        max_iters: c.max_iters,
        thickness: c.thickness,
        gain: c.gain.unwrap_or(0.0),
    }
}

/// The built-in catalog of 11 topologies. Never fails.
#[no_mangle]
pub extern "C" fn rl_catalog_default() -> *mut RlCatalog {
    Box::into_raw(Box::new(RlCatalog(Catalog::default_catalog())))
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_catalog_load(path: *const c_char, out: *mut *mut RlCatalog) -> RlStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, RlCatalog(Catalog::load(&path)?))
    })
}

/// Number of topologies; 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_catalog_len(catalog: *const RlCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `catalog` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_catalog_free(catalog: *mut RlCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Creates a field from `4 * w * h` floats, channel-major
/// (bg, wall-floor, wall-wall, wall-ceiling), each plane row-major.
///
/// # Safety
/// `data` must point to `len` floats; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_field_from_data(
    w: usize,
    h: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut RlField,
) -> RlStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let values = std::slice::from_raw_parts(data, len).to_vec();
        put(out, RlField(FeatureField::from_data(w, h, values)?))
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_field_load(path: *const c_char, out: *mut *mut RlField) -> RlStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, RlField(FeatureField::load(&path)?))
    })
}

/// # Safety
/// `field` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn rl_field_save(field: *const RlField, path: *const c_char) -> RlStatus {
    guard(|| {
        let field = get(field, "field")?;
        field.0.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_field_width(field: *const RlField) -> usize {
    field.as_ref().map_or(0, |f| f.0.width())
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_field_height(field: *const RlField) -> usize {
    field.as_ref().map_or(0, |f| f.0.height())
}

/// # Safety
/// `field` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_field_free(field: *mut RlField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Renders a synthetic field for `layout` on a `w` x `h` grid.
///
/// # Safety
/// Handles and pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_synth(
    layout: *const RlLayout,
    w: usize,
    h: usize,
    params: *const RlSynthParams,
    out: *mut *mut RlField,
) -> RlStatus {
    guard(|| {
        let layout = get(layout, "layout")?;
        let params: SynthParams = (*get(params, "params")?).into();
        put(out, RlField(synth_field(&layout.0, w, h, &params)?))
    })
}

/// Builds a layout from `n` interleaved `x, y` pairs.
///
/// # Safety
/// `xy` must point to `2 * n` doubles; handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_new(
    catalog: *const RlCatalog,
    topology_id: u32,
    xy: *const f64,
    n: usize,
    w: usize,
    h: usize,
    out: *mut *mut RlLayout,
) -> RlStatus {
    guard(|| {
        let catalog = get(catalog, "catalog")?;
        if xy.is_null() && n > 0 {
            return Err(null("xy"));
        }
        let coords = if n == 0 { &[][..] } else { std::slice::from_raw_parts(xy, 2 * n) };
        let file = LayoutFile {
            topology_id,
            points: coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        };
        put(out, RlLayout(file.to_state(&catalog.0, w, h)?))
    })
}

/// The average state of a topology on a `w` x `h` grid.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_average(
    catalog: *const RlCatalog,
    topology_id: u32,
    w: usize,
    h: usize,
    out: *mut *mut RlLayout,
) -> RlStatus {
    guard(|| {
        let catalog = get(catalog, "catalog")?;
        let spec = catalog
            .0
            .get(topology_id)
            .ok_or_else(|| Fail(RlStatus::InvalidArgument, format!("unknown topology id {topology_id}")))?;
        put(out, RlLayout(average_init(spec, w, h)?))
    })
}

/// # Safety
/// `path` must be a valid C string; handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_load(
    catalog: *const RlCatalog,
    path: *const c_char,
    w: usize,
    h: usize,
    out: *mut *mut RlLayout,
) -> RlStatus {
    guard(|| {
        let catalog = get(catalog, "catalog")?;
        let file = LayoutFile::load(&path_arg(path)?)?;
        put(out, RlLayout(file.to_state(&catalog.0, w, h)?))
    })
}

/// # Safety
/// `layout` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_save(layout: *const RlLayout, path: *const c_char) -> RlStatus {
    guard(|| {
        let layout = get(layout, "layout")?;
        layout.0.to_file().save(&path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `layout` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_topology_id(layout: *const RlLayout) -> u32 {
    layout.as_ref().map_or(0, |l| l.0.topology().id)
}

/// # Safety
/// `layout` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_num_points(layout: *const RlLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.0.points().len())
}

/// Writes the conjunctions as interleaved `x, y` into `xy`, which holds
/// `cap` doubles.
///
/// # Safety
/// `xy` must be valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_points(layout: *const RlLayout, xy: *mut f64, cap: usize) -> RlStatus {
    guard(|| {
        let layout = get(layout, "layout")?;
        let pts = layout.0.points();
        if cap < 2 * pts.len() {
            return Err(Fail(
                RlStatus::BufferTooSmall,
                format!("need {} doubles, got {cap}", 2 * pts.len()),
            ));
        }
        if xy.is_null() {
            return Err(null("xy"));
        }
        let out = std::slice::from_raw_parts_mut(xy, 2 * pts.len());
        for (dst, p) in out.chunks_exact_mut(2).zip(pts) {
            dst[0] = p.x;
            dst[1] = p.y;
        }
        Ok(())
    })
}

/// # Safety
/// `layout` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_layout_free(layout: *mut RlLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Energy `-CO` of `layout` on `field`.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_energy(field: *const RlField, layout: *const RlLayout, out: *mut f64) -> RlStatus {
    guard(|| {
        let field = get(field, "field")?;
        let layout = get(layout, "layout")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = roomlayout::energy(&field.0, &layout.0, field.0.width(), field.0.height())?;
        Ok(())
    })
}

/// Fits a layout to `field`. `method` is an [`RlMethod`] value. With
/// `topology_id == 0` every catalog topology is tried and the lowest energy
/// wins. `config` may be null for defaults; `summary` may be null.
///
/// # Safety
/// Handles and pointers must be valid or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn rl_infer(
    field: *const RlField,
    catalog: *const RlCatalog,
    method: u32,
    topology_id: u32,
    config: *const RlOptimConfig,
    out: *mut *mut RlLayout,
    summary: *mut RlInferSummary,
) -> RlStatus {
    guard(|| {
        let field = get(field, "field")?;
        let catalog = get(catalog, "catalog")?;
        let cfg: OptimConfig = config.as_ref().map_or_else(OptimConfig::default, |c| (*c).into());
        let method = method_arg(method)?;
        let (w, h) = (field.0.width(), field.0.height());
        let (best, elapsed) = if topology_id == 0 {
            let (best, all) = roomlayout::select_topology(&field.0, &catalog.0, &cfg, method)?;
            let elapsed = all.iter().map(|r| r.elapsed_secs).sum();
            (best, elapsed)
        } else {
            let spec = catalog
                .0
                .get(topology_id)
                .ok_or_else(|| Fail(RlStatus::InvalidArgument, format!("unknown topology id {topology_id}")))?;
            let r = roomlayout::run(&field.0, &average_init(spec, w, h)?, &cfg, method)?;
            let elapsed = r.elapsed_secs;
            (r, elapsed)
        };
        if out.is_null() {
            return Err(null("output pointer"));
        }
        if let Some(s) = summary.as_mut() {
            *s = RlInferSummary {
                topology_id: best.topology_id,
                final_energy: best.final_energy,
                iters: best.iters,
                elapsed_secs: elapsed,
                no_progress: best.no_progress,
            };
        }
        put(out, RlLayout(best.final_state))
    })
}

/// Corner and pixel error of `pred` against `gt` on a `w` x `h` grid.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_evaluate(
    pred: *const RlLayout,
    gt: *const RlLayout,
    w: usize,
    h: usize,
    out: *mut RlEval,
) -> RlStatus {
    guard(|| {
        let pred = get(pred, "pred")?;
        let gt = get(gt, "gt")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let r = evaluate(&pred.0, &gt.0, w, h)?;
        *out = RlEval {
            e_corner: r.e_corner,
            e_pixel: r.e_pixel,
        };
        Ok(())
    })
}
