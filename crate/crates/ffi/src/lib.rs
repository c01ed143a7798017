//! C ABI over the soft-edit library.
//!
//! Alphabets and encodings are opaque heap handles released with their
//! `*_free` function. Every fallible call returns an [`SeStatus`]; on failure
//! [`se_last_error_message`] describes the most recent error on the calling
//! thread. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use soft_edit::{
    decode_argmax, encode_one_hot, levenshtein, sed, sed_unbiased, sed_value_grad, Alphabet,
    Error, SedParams, SequenceEncoding,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnknownSymbol = 4,
    AlphabetMismatch = 5,
    BufferTooSmall = 6,
    Internal = 7,
    Panic = 8,
}

/// Opaque symbol alphabet.
pub struct SeAlphabet(Alphabet);

/// Opaque `length x alphabet_size` encoding matrix.
pub struct SeEncoding(SequenceEncoding);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SeStatus, msg: impl Into<String>) -> SeStatus {
    set_error(msg.into());
    status
}

fn from_core(e: Error) -> SeStatus {
    let status = match e {
        Error::UnknownSymbol { .. } | Error::UnknownSymbolInRecord { .. } => SeStatus::UnknownSymbol,
        Error::AlphabetMismatch { .. } => SeStatus::AlphabetMismatch,
        Error::Io(_) | Error::Json(_) => SeStatus::Internal,
        _ => SeStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`SeStatus::Panic`].
fn guard(f: impl FnOnce() -> SeStatus) -> SeStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SeStatus::Panic, "panic inside soft-edit"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SeStatus> {
    if p.is_null() {
        return Err(fail(SeStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SeStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, SeStatus> {
    p.as_ref()
        .ok_or_else(|| fail(SeStatus::NullPointer, format!("{what} is null")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_core(e),
        }
    };
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), SeStatus> {
    if p.is_null() {
        Err(fail(SeStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn se_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Looks up a preset alphabet (`"dna"` or `"protein"`).
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_alphabet_preset(name: *const c_char, out: *mut *mut SeAlphabet) -> SeStatus {
    guard(|| {
        let name = tri!(str_arg(name, "name"));
        tri!(check_out(out, "out"));
        match Alphabet::preset(name) {
            Some(a) => {
                *out = Box::into_raw(Box::new(SeAlphabet(a)));
                SeStatus::Ok
            }
            None => fail(SeStatus::InvalidArgument, format!("unknown preset {name:?}")),
        }
    })
}

/// Builds an alphabet from a string of distinct symbols.
///
/// # Safety
/// `symbols` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_alphabet_new(symbols: *const c_char, out: *mut *mut SeAlphabet) -> SeStatus {
    guard(|| {
        let symbols = tri!(str_arg(symbols, "symbols"));
        tri!(check_out(out, "out"));
        let a = core!(Alphabet::new(symbols));
        *out = Box::into_raw(Box::new(SeAlphabet(a)));
        SeStatus::Ok
    })
}

/// Number of symbols, or 0 for a null handle.
///
/// # Safety
/// `alphabet` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_alphabet_size(alphabet: *const SeAlphabet) -> usize {
    alphabet.as_ref().map_or(0, |a| a.0.size())
}

/// # Safety
/// `alphabet` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn se_alphabet_free(alphabet: *mut SeAlphabet) {
    if !alphabet.is_null() {
        drop(Box::from_raw(alphabet));
    }
}

/// One-hot encodes `seq`.
///
/// # Safety
/// `alphabet` must be a live handle, `seq` a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_encode(
    alphabet: *const SeAlphabet,
    seq: *const c_char,
    out: *mut *mut SeEncoding,
) -> SeStatus {
    guard(|| {
        let a = tri!(ref_arg(alphabet, "alphabet"));
        let seq = tri!(str_arg(seq, "seq"));
        tri!(check_out(out, "out"));
        let x = core!(encode_one_hot(seq, &a.0));
        *out = Box::into_raw(Box::new(SeEncoding(x)));
        SeStatus::Ok
    })
}

/// Copies a row-major `rows x alphabet_size` matrix whose rows are
/// probability vectors.
///
/// # Safety
/// `data` must point to `rows * alphabet_size` doubles (may be null when
/// `rows` is 0) and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_encoding_from_matrix(
    data: *const f64,
    rows: usize,
    alphabet_size: usize,
    out: *mut *mut SeEncoding,
) -> SeStatus {
    guard(|| {
        tri!(check_out(out, "out"));
        let Some(n) = rows.checked_mul(alphabet_size) else {
            return fail(SeStatus::InvalidArgument, "matrix size overflows");
        };
        let values = if n == 0 {
            Vec::new()
        } else if data.is_null() {
            return fail(SeStatus::NullPointer, "data is null");
        } else {
            std::slice::from_raw_parts(data, n).to_vec()
        };
        let x = core!(SequenceEncoding::from_rows(values, alphabet_size));
        *out = Box::into_raw(Box::new(SeEncoding(x)));
        SeStatus::Ok
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `x` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_encoding_len(x: *const SeEncoding) -> usize {
    x.as_ref().map_or(0, |x| x.0.len())
}

/// Row width, or 0 for a null handle.
///
/// # Safety
/// `x` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_encoding_alphabet_size(x: *const SeEncoding) -> usize {
    x.as_ref().map_or(0, |x| x.0.alphabet_size())
}

/// # Safety
/// `x` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn se_encoding_free(x: *mut SeEncoding) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

/// Soft edit distance at temperature `tau` (< 0); the unbiased variant
/// when `unbiased` is nonzero.
///
/// # Safety
/// `x1`, `x2` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_distance(
    x1: *const SeEncoding,
    x2: *const SeEncoding,
    tau: f64,
    unbiased: i32,
    out: *mut f64,
) -> SeStatus {
    guard(|| {
        let x1 = tri!(ref_arg(x1, "x1"));
        let x2 = tri!(ref_arg(x2, "x2"));
        tri!(check_out(out, "out"));
        let p = core!(SedParams::new(tau));
        let v = if unbiased != 0 {
            core!(sed_unbiased(&x1.0, &x2.0, p))
        } else {
            core!(sed(&x1.0, &x2.0, p))
        };
        *out = v;
        SeStatus::Ok
    })
}

/// Classic edit distance between two strings, counted in Unicode scalar values.
///
/// # Safety
/// `s1`, `s2` must be nul-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_levenshtein(s1: *const c_char, s2: *const c_char, out: *mut usize) -> SeStatus {
    guard(|| {
        let s1 = tri!(str_arg(s1, "s1"));
        let s2 = tri!(str_arg(s2, "s2"));
        tri!(check_out(out, "out"));
        *out = levenshtein(s1, s2);
        SeStatus::Ok
    })
}

/// Value and gradient of the distance with respect to both matrices.
///
/// `d_x1` and `d_x2` receive row-major gradients and must hold at least
/// `len * alphabet_size` doubles of the matching input; otherwise
/// [`SeStatus::BufferTooSmall`] is returned and nothing is written.
///
/// # Safety
/// Handles must be live; buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn se_gradient(
    x1: *const SeEncoding,
    x2: *const SeEncoding,
    tau: f64,
    unbiased: i32,
    out_value: *mut f64,
    d_x1: *mut f64,
    d_x1_len: usize,
    d_x2: *mut f64,
    d_x2_len: usize,
) -> SeStatus {
    guard(|| {
        let x1 = tri!(ref_arg(x1, "x1"));
        let x2 = tri!(ref_arg(x2, "x2"));
        tri!(check_out(out_value, "out_value"));
        let need1 = x1.0.as_slice().len();
        let need2 = x2.0.as_slice().len();
        if d_x1_len < need1 || d_x2_len < need2 {
            return fail(
                SeStatus::BufferTooSmall,
                format!("gradient buffers need {need1} and {need2} values"),
            );
        }
        if (need1 > 0 && d_x1.is_null()) || (need2 > 0 && d_x2.is_null()) {
            return fail(SeStatus::NullPointer, "gradient buffer is null");
        }
        let p = core!(SedParams::new(tau));
        let g = core!(sed_value_grad(&x1.0, &x2.0, p, unbiased != 0));
        if need1 > 0 {
            std::slice::from_raw_parts_mut(d_x1, need1).copy_from_slice(&g.d_x1);
        }
        if need2 > 0 {
            std::slice::from_raw_parts_mut(d_x2, need2).copy_from_slice(&g.d_x2);
        }
        *out_value = g.value;
        SeStatus::Ok
    })
}

/// Writes the most likely symbol of each row as a nul-terminated UTF-8 string.
///
/// `out_needed` (if non-null) always receives the required buffer size in
/// bytes including the terminator; [`SeStatus::BufferTooSmall`] is returned
/// when `buf_len` is smaller.
///
/// # Safety
/// Handles must be live and `buf` valid for `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn se_decode(
    x: *const SeEncoding,
    alphabet: *const SeAlphabet,
    buf: *mut c_char,
    buf_len: usize,
    out_needed: *mut usize,
) -> SeStatus {
    guard(|| {
        let x = tri!(ref_arg(x, "x"));
        let a = tri!(ref_arg(alphabet, "alphabet"));
        if x.0.alphabet_size() != a.0.size() {
            return from_core(Error::AlphabetMismatch {
                left: x.0.alphabet_size(),
                right: a.0.size(),
            });
        }
        let s = decode_argmax(&x.0, &a.0);
        let needed = s.len() + 1;
        if !out_needed.is_null() {
            *out_needed = needed;
        }
        if buf_len < needed {
            return fail(SeStatus::BufferTooSmall, format!("decoded string needs {needed} bytes"));
        }
        if buf.is_null() {
            return fail(SeStatus::NullPointer, "buf is null");
        }
        ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
        *buf.add(s.len()) = 0;
        SeStatus::Ok
    })
}
