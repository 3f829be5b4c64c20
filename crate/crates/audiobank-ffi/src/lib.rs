//! C ABI over the audiobank pipeline.
//!
//! Opaque handles, status codes, and a thread-local last-error message.
//! A loaded bank carries its pipeline fingerprint, so featurization needs
//! no separate configuration: load a bank, ask for its feature length,
//! and featurize WAV files into caller-provided buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use audiobank::audio_io::{default_corpus_specs, load_corpus, load_wav, save_corpus, synth_corpus};
use audiobank::bank::build_bank;
use audiobank::featurize::featurize;
use audiobank::DetectorBank;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AbStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Invalid argument (bad sizes, bad config values).
    InvalidArgument = 3,
    /// File system or decode failure.
    Io = 4,
    /// The operation failed; see `ab_last_error_message`.
    Failed = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &audiobank::Error) -> AbStatus {
    use audiobank::Error;
    set_error(&err.to_string());
    match err {
        Error::FileNotFound(_) | Error::Io { .. } => AbStatus::Io,
        Error::InvalidConfig(_) | Error::FingerprintMismatch { .. } => AbStatus::InvalidArgument,
        _ => AbStatus::Failed,
    }
}

/// Opaque detector bank handle.
pub struct AbBank {
    bank: DetectorBank,
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, AbStatus> {
    if ptr.is_null() {
        set_error("null path argument");
        return Err(AbStatus::NullArgument);
    }
    let s = unsafe { CStr::from_ptr(ptr) };
    match s.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid utf-8");
            Err(AbStatus::InvalidUtf8)
        }
    }
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `buf_len`). Returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ab_last_error_message(buf: *mut c_char, buf_len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && buf_len > 0 {
            let n = bytes.len().min(buf_len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Generate the bundled synthetic corpus (WAVs plus manifest.json) under
/// `out_dir`, `per_class` clips for each of the 12 classes.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ab_synth_corpus(
    out_dir: *const c_char,
    seed: u64,
    per_class: usize,
) -> AbStatus {
    let out = match unsafe { path_arg(out_dir) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    if per_class == 0 {
        set_error("per_class must be >= 1");
        return AbStatus::InvalidArgument;
    }
    let specs = default_corpus_specs();
    let counts = vec![per_class; specs.len()];
    match synth_corpus(&specs, &counts, seed).and_then(|items| save_corpus(&items, &out)) {
        Ok(()) => AbStatus::Ok,
        Err(e) => status_for(&e),
    }
}

/// Build a bank from every clip in a corpus manifest, with `nd` detectors
/// per class, and return an owned handle in `out_bank`.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string; `out_bank` must be a
/// valid pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_build(
    manifest_path: *const c_char,
    nd: usize,
    seed: u64,
    out_bank: *mut *mut AbBank,
) -> AbStatus {
    if out_bank.is_null() {
        set_error("null out_bank");
        return AbStatus::NullArgument;
    }
    let manifest = match unsafe { path_arg(manifest_path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let mut cfg = audiobank::PipelineConfig::default();
    if nd == 0 {
        set_error("nd must be >= 1");
        return AbStatus::InvalidArgument;
    }
    cfg.detectors_per_class = nd;

    let build = || -> audiobank::Result<DetectorBank> {
        let items = load_corpus(&manifest)?;
        let clips: Vec<(usize, usize, &audiobank::Signal)> = items
            .iter()
            .enumerate()
            .map(|(i, item)| (i, item.class_id, &item.signal))
            .collect();
        build_bank(&clips, &cfg, seed)
    };
    match build() {
        Ok(bank) => {
            unsafe { *out_bank = Box::into_raw(Box::new(AbBank { bank })) };
            AbStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

/// Load a bank directory saved by `ab_bank_save` or the CLI.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out_bank` must be a valid
/// pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_load(dir: *const c_char, out_bank: *mut *mut AbBank) -> AbStatus {
    if out_bank.is_null() {
        set_error("null out_bank");
        return AbStatus::NullArgument;
    }
    let dir = match unsafe { path_arg(dir) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match DetectorBank::load(&dir) {
        Ok(bank) => {
            unsafe { *out_bank = Box::into_raw(Box::new(AbBank { bank })) };
            AbStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

/// Save a bank as a directory (manifest plus binary detector fields).
///
/// # Safety
/// `bank` must be a live handle from `ab_bank_build` or `ab_bank_load`.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_save(bank: *const AbBank, dir: *const c_char) -> AbStatus {
    let Some(handle) = (unsafe { bank.as_ref() }) else {
        set_error("null bank");
        return AbStatus::NullArgument;
    };
    let dir = match unsafe { path_arg(dir) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match handle.bank.save(&dir) {
        Ok(()) => AbStatus::Ok,
        Err(e) => status_for(&e),
    }
}

/// Number of detectors in the bank; 0 for a null handle.
///
/// # Safety
/// `bank` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_detector_count(bank: *const AbBank) -> usize {
    unsafe { bank.as_ref() }.map_or(0, |h| h.bank.len())
}

/// Length of the feature vector this bank produces (detectors x 21); 0 for
/// a null handle.
///
/// # Safety
/// `bank` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_feature_len(bank: *const AbBank) -> usize {
    unsafe { bank.as_ref() }.map_or(0, |h| h.bank.feature_len())
}

/// Featurize one WAV file against the bank. `out` must hold exactly
/// `ab_bank_feature_len(bank)` doubles.
///
/// # Safety
/// `bank` must be a live handle; `out` must point to `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_featurize_wav(
    bank: *const AbBank,
    wav_path: *const c_char,
    out: *mut f64,
    out_len: usize,
) -> AbStatus {
    let Some(handle) = (unsafe { bank.as_ref() }) else {
        set_error("null bank");
        return AbStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null output buffer");
        return AbStatus::NullArgument;
    }
    let expected = handle.bank.feature_len();
    if out_len != expected {
        set_error(&format!(
            "output buffer holds {out_len} values, bank produces {expected}"
        ));
        return AbStatus::InvalidArgument;
    }
    let path = match unsafe { path_arg(wav_path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let cfg = handle.bank.fingerprint.to_config();
    let result = load_wav(&path).and_then(|signal| featurize(&signal, &handle.bank, &cfg));
    match result {
        Ok(features) => {
            unsafe {
                std::ptr::copy_nonoverlapping(features.values().as_ptr(), out, expected);
            }
            AbStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

/// Release a bank handle. Null is a no-op.
///
/// # Safety
/// `bank` must be null or an owned handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ab_bank_free(bank: *mut AbBank) {
    if !bank.is_null() {
        drop(unsafe { Box::from_raw(bank) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c_path(p: &std::path::Path) -> CString {
        CString::new(p.to_str().unwrap()).unwrap()
    }

    fn last_error() -> String {
        let mut buf = vec![0u8; 256];
        let n = unsafe { ab_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
        String::from_utf8_lossy(&buf[..n.min(255)]).to_string()
    }

    /// The full handle lifecycle: synth, build, save, load, featurize.
    #[test]
    fn featurize_through_the_c_surface() {
        let dir = tempfile::tempdir().unwrap();
        let corpus_dir = dir.path().join("corpus");

        // Short clips keep this quick: go through the library, then the ABI.
        let specs: Vec<_> = default_corpus_specs()
            .into_iter()
            .take(2)
            .map(|mut s| {
                s.duration_range_s = (0.5, 0.6);
                s
            })
            .collect();
        let items = synth_corpus(&specs, &[3, 3], 4).unwrap();
        save_corpus(&items, &corpus_dir).unwrap();
        let manifest = c_path(&corpus_dir.join("manifest.json"));

        let mut bank: *mut AbBank = std::ptr::null_mut();
        unsafe {
            assert_eq!(
                ab_bank_build(manifest.as_ptr(), 1, 9, &mut bank),
                AbStatus::Ok
            );
            assert!(!bank.is_null());
            assert_eq!(ab_bank_detector_count(bank), 2);
            let len = ab_bank_feature_len(bank);
            assert_eq!(len, 2 * 21);

            let saved = dir.path().join("bank");
            assert_eq!(ab_bank_save(bank, c_path(&saved).as_ptr()), AbStatus::Ok);

            let mut reloaded: *mut AbBank = std::ptr::null_mut();
            assert_eq!(
                ab_bank_load(c_path(&saved).as_ptr(), &mut reloaded),
                AbStatus::Ok
            );

            let wav = c_path(&corpus_dir.join("class_00_tone_burst/clip_000.wav"));
            let mut out = vec![0.0f64; len];
            assert_eq!(
                ab_featurize_wav(bank, wav.as_ptr(), out.as_mut_ptr(), len),
                AbStatus::Ok
            );
            assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(out.iter().any(|&v| v > 0.0));

            // The reloaded bank produces identical features.
            let mut out2 = vec![0.0f64; len];
            assert_eq!(
                ab_featurize_wav(reloaded, wav.as_ptr(), out2.as_mut_ptr(), len),
                AbStatus::Ok
            );
            assert_eq!(out, out2);

            // Matches the in-process library result.
            let cfg = audiobank::PipelineConfig::default();
            let direct = featurize(&items[0].signal, &(*bank).bank, &cfg).unwrap();
            for (a, b) in out.iter().zip(direct.values()) {
                // WAV round trip quantizes to 16 bits; features stay close.
                assert!((a - b).abs() < 1e-2, "{a} vs {b}");
            }

            ab_bank_free(bank);
            ab_bank_free(reloaded);
        }
    }

    #[test]
    fn status_codes_and_error_messages() {
        let mut bank: *mut AbBank = std::ptr::null_mut();
        let missing = CString::new("/nonexistent/manifest.json").unwrap();
        unsafe {
            assert_eq!(
                ab_bank_build(missing.as_ptr(), 1, 0, &mut bank),
                AbStatus::Io
            );
            assert!(last_error().contains("manifest.json"));

            assert_eq!(
                ab_bank_build(std::ptr::null(), 1, 0, &mut bank),
                AbStatus::NullArgument
            );

            assert_eq!(ab_bank_detector_count(std::ptr::null()), 0);
            let mut out = [0.0f64; 1];
            assert_eq!(
                ab_featurize_wav(std::ptr::null(), missing.as_ptr(), out.as_mut_ptr(), 1),
                AbStatus::NullArgument
            );
        }
    }

    #[test]
    fn wrong_buffer_size_is_invalid_argument() {
        let dir = tempfile::tempdir().unwrap();
        let corpus_dir = dir.path().join("corpus");
        let specs: Vec<_> = default_corpus_specs()
            .into_iter()
            .take(2)
            .map(|mut s| {
                s.duration_range_s = (0.5, 0.6);
                s
            })
            .collect();
        let items = synth_corpus(&specs, &[2, 2], 1).unwrap();
        save_corpus(&items, &corpus_dir).unwrap();

        let manifest = c_path(&corpus_dir.join("manifest.json"));
        let mut bank: *mut AbBank = std::ptr::null_mut();
        unsafe {
            assert_eq!(
                ab_bank_build(manifest.as_ptr(), 1, 2, &mut bank),
                AbStatus::Ok
            );
            let wav = c_path(&corpus_dir.join("class_00_tone_burst/clip_000.wav"));
            let mut out = vec![0.0f64; 3];
            assert_eq!(
                ab_featurize_wav(bank, wav.as_ptr(), out.as_mut_ptr(), 3),
                AbStatus::InvalidArgument
            );
            assert!(last_error().contains("buffer"));
            ab_bank_free(bank);
        }
    }

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(ab_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn synth_corpus_writes_manifest_and_wavs() {
        let dir = tempfile::tempdir().unwrap();
        unsafe {
            assert_eq!(
                ab_synth_corpus(c_path(dir.path()).as_ptr(), 3, 1),
                AbStatus::Ok
            );
            assert_eq!(
                ab_synth_corpus(c_path(dir.path()).as_ptr(), 3, 0),
                AbStatus::InvalidArgument
            );
        }
        let manifest = dir.path().join("manifest.json");
        assert!(manifest.exists());
        let items = load_corpus(&manifest).unwrap();
        assert_eq!(items.len(), 12);
    }
}
