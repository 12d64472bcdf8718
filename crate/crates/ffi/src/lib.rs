//! C ABI over `hybridch`.
//!
//! Sequences are opaque heap handles created by `hc_*_new` and released with
//! [`hc_sequence_free`]. Every fallible call returns an [`HcStatus`]; on
//! failure a message is kept per thread and can be copied out with
//! [`hc_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hybridch::interleave::InterleaveError;
use hybridch::wakeup::WakeupError;
use hybridch::{
    first_rendezvous, generate_schedule, verify_discovery, ChSequence, ChannelSet, ClockDrift, HybridProtocol, NodeId,
    ProtocolKind, RandomPolicy, WakeUpSchedule,
};
use num_rational::Ratio;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// No self-discovering schedule, or no overlap between two schedules.
    Infeasible = 3,
    /// No padded channel count makes the base period coprime with the
    /// number of awake slots.
    NoPadding = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Base channel-hopping protocol.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcBase {
    Random = 0,
    Crseq = 1,
    JumpStay = 2,
    Modular = 3,
}

impl From<HcBase> for ProtocolKind {
    fn from(b: HcBase) -> Self {
        match b {
            HcBase::Random => ProtocolKind::Random,
            HcBase::Crseq => ProtocolKind::Crseq,
            HcBase::JumpStay => ProtocolKind::JumpStay,
            HcBase::Modular => ProtocolKind::Modular,
        }
    }
}

/// Opaque channel-hopping sequence.
pub struct HcSequence {
    seq: ChSequence,
    bound: Option<u64>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(HcStatus, String);

impl Failure {
    fn invalid(msg: impl ToString) -> Self {
        Failure(HcStatus::InvalidArgument, msg.to_string())
    }

    fn null(what: &str) -> Self {
        Failure(HcStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<WakeupError> for Failure {
    fn from(e: WakeupError) -> Self {
        let status = match e {
            WakeupError::Infeasible { .. } => HcStatus::Infeasible,
            _ => HcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<InterleaveError> for Failure {
    fn from(e: InterleaveError) -> Self {
        let status = match e {
            InterleaveError::NoPadding { .. } => HcStatus::NoPadding,
            _ => HcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HcStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure(HcStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            HcStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn schedule_arg(s: *const c_char, what: &str) -> Result<WakeUpSchedule, Failure> {
    if s.is_null() {
        return Err(Failure::null(what));
    }
    let text = CStr::from_ptr(s).to_str().map_err(Failure::invalid)?;
    Ok(text.parse()?)
}

unsafe fn sequence_arg<'a>(h: *const HcSequence, what: &str) -> Result<&'a HcSequence, Failure> {
    h.as_ref().ok_or_else(|| Failure::null(what))
}

fn channels(n: u32) -> Result<ChannelSet, Failure> {
    ChannelSet::new(n).map_err(Failure::invalid)
}

fn node(id: u64) -> Result<NodeId, Failure> {
    NodeId::new(id).map_err(Failure::invalid)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Creates the base sequence of node `id` (1-based) over `n` channels.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn hc_base_sequence_new(
    base: HcBase,
    n: u32,
    id: u64,
    seed: u64,
    out: *mut *mut HcSequence,
) -> HcStatus {
    guard(|| {
        let kind = ProtocolKind::from(base);
        let set = channels(n)?;
        let seq = kind.sequence(set, node(id)?, seed);
        let handle = Box::new(HcSequence {
            seq,
            bound: kind.period(set),
        });
        write_out(out, Box::into_raw(handle))
    })
}

/// Creates the hybrid sequence that interleaves `base` with random hopping
/// under `schedule`, a NUL-terminated string of `0`/`1`. With `adversarial`
/// set, random slots never produce a rendezvous.
///
/// # Safety
/// `schedule` must be a valid C string; `out` must be valid for a pointer
/// write.
#[no_mangle]
pub unsafe extern "C" fn hc_hybrid_sequence_new(
    base: HcBase,
    n: u32,
    id: u64,
    schedule: *const c_char,
    seed: u64,
    adversarial: bool,
    out: *mut *mut HcSequence,
) -> HcStatus {
    guard(|| {
        let x = schedule_arg(schedule, "schedule")?;
        let mut h = HybridProtocol::new(base.into(), channels(n)?, node(id)?, x, seed)?;
        if adversarial {
            h = h.with_random_policy(RandomPolicy::Adversarial);
        }
        let handle = Box::new(HcSequence {
            seq: h.sequence(),
            bound: h.ttr_bound(),
        });
        write_out(out, Box::into_raw(handle))
    })
}

/// Releases a sequence. Null is ignored.
///
/// # Safety
/// `seq` must come from an `hc_*_new` call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hc_sequence_free(seq: *mut HcSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Channel (1-based) the sequence visits at slot `t`.
///
/// # Safety
/// `seq` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hc_sequence_channel_at(seq: *const HcSequence, t: u64, out: *mut u32) -> HcStatus {
    guard(|| {
        let s = sequence_arg(seq, "sequence")?;
        write_out(out, s.seq.channel_at(t).get())
    })
}

/// Guaranteed rendezvous bound: the base period for a base sequence, `τT`
/// for a hybrid one. Writes 0 when there is none (random hopping).
///
/// # Safety
/// `seq` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hc_sequence_ttr_bound(seq: *const HcSequence, out: *mut u64) -> HcStatus {
    guard(|| {
        let s = sequence_arg(seq, "sequence")?;
        write_out(out, s.bound.unwrap_or(0))
    })
}

/// Smallest period up to `max_period`; writes 0 when none is found.
///
/// # Safety
/// `seq` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hc_detect_period(seq: *const HcSequence, max_period: u64, out: *mut u64) -> HcStatus {
    guard(|| {
        let s = sequence_arg(seq, "sequence")?;
        write_out(out, hybridch::detect_period(&s.seq, max_period).unwrap_or(0))
    })
}

/// First slot in `[0, horizon)` at which `a` and `b` meet under clock drift
/// `drift` (`b` runs `drift` slots ahead when positive). `found` is set to
/// false, and `slot` left untouched, if they never meet.
///
/// # Safety
/// `a`, `b` must be live handles; `slot` and `found` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hc_first_rendezvous(
    a: *const HcSequence,
    b: *const HcSequence,
    drift: i64,
    horizon: u64,
    slot: *mut u64,
    found: *mut bool,
) -> HcStatus {
    guard(|| {
        let (a, b) = (sequence_arg(a, "a")?, sequence_arg(b, "b")?);
        if slot.is_null() {
            return Err(Failure::null("slot"));
        }
        match first_rendezvous(&a.seq, &b.seq, ClockDrift(drift), horizon) {
            Some(t) => {
                write_out(found, true)?;
                write_out(slot, t)
            }
            None => write_out(found, false),
        }
    })
}

/// Writes a self-discovering schedule with `awake` of `period` slots awake
/// as a NUL-terminated `0`/`1` string. `buf` needs `period + 1` bytes.
///
/// # Safety
/// `buf` must be valid for `len` byte writes.
#[no_mangle]
pub unsafe extern "C" fn hc_generate_schedule(period: u32, awake: u32, buf: *mut c_char, len: usize) -> HcStatus {
    guard(|| {
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        if period == 0 {
            return Err(Failure::invalid("period must be positive"));
        }
        let x = generate_schedule(period as usize, Ratio::new(awake as u64, period as u64))?;
        let text = x.to_string();
        if len < text.len() + 1 {
            return Err(Failure(
                HcStatus::BufferTooSmall,
                format!("need {} bytes, got {len}", text.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
        buf.add(text.len()).write(0);
        Ok(())
    })
}

/// Checks that schedules `x` and `y` share an awake slot under every
/// relative rotation. On success `horizon` receives the slot count within
/// which overlap is certified; otherwise the call returns `Infeasible`.
///
/// # Safety
/// `x`, `y` must be valid C strings; `horizon` valid for a write or null.
#[no_mangle]
pub unsafe extern "C" fn hc_verify_discovery(x: *const c_char, y: *const c_char, horizon: *mut u64) -> HcStatus {
    guard(|| {
        let (x, y) = (schedule_arg(x, "x")?, schedule_arg(y, "y")?);
        let cert = verify_discovery(&x, &y)
            .ok_or_else(|| Failure(HcStatus::Infeasible, format!("{x} and {y} miss at some rotation")))?;
        if !horizon.is_null() {
            horizon.write(cert.horizon());
        }
        Ok(())
    })
}

/// `B/T · base_attr + (1 - B/T) · N`; NaN when `overlap > period`,
/// `period == 0` or `n == 0`.
#[no_mangle]
pub extern "C" fn hc_predict_attr(base_attr: f64, overlap: u64, period: u64, n: u32) -> f64 {
    match ChannelSet::new(n) {
        Ok(set) if period > 0 && overlap <= period => {
            hybridch::metrics::predict_hybrid_attr(base_attr, overlap, period, set)
        }
        _ => f64::NAN,
    }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to fit, into `buf`. Returns the full message length in bytes;
/// 0 means the last call succeeded. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be valid for `len` byte writes, or null.
#[no_mangle]
pub unsafe extern "C" fn hc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            buf.add(n).write(0);
        }
        msg.len()
    })
}
