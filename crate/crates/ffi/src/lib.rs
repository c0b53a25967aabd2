//! C ABI over the `polytts` library.
//!
//! Every fallible function returns a [`PolyttsStatus`]; on failure the
//! message is available from [`polytts_last_error_message`] on the same
//! thread. Objects are handed out as opaque pointers and each kind has a
//! matching `*_free` function. Output pointers are only written on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;
use std::sync::Arc;

use polytts::config::RunConfig;
use polytts::data::{read_wav, write_wav, Waveform, SAMPLE_RATE};
use polytts::frontend::PhoneSequence;
use polytts::pipeline::TtsSystem;
use polytts::speaker::{embed, SpeakerEmbedder};

/// Result code of every fallible call. Zero means success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyttsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    UnknownSymbol = 4,
    G2p = 5,
    Parse = 6,
    Shape = 7,
    Contract = 8,
    Audio = 9,
    Alignment = 10,
    EmptyTask = 11,
    Checkpoint = 12,
    ZeroNorm = 13,
    Io = 14,
    Tensor = 15,
    Json = 16,
    Wav = 17,
    Panic = 18,
}

/// Kind of a unit produced by the frontend.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyttsUnitKind {
    Phoneme = 0,
    WordBoundary = 1,
    Pause = 2,
    SentenceMark = 3,
}

/// Loaded acoustic model, frontend, vocoder and speaker embedder.
pub struct PolyttsSystem {
    system: TtsSystem,
    embedder: Arc<dyn SpeakerEmbedder>,
}

/// Unit sequence for one utterance. Symbols are NUL-terminated copies.
pub struct PolyttsUnits {
    symbols: Vec<CString>,
    kinds: Vec<PolyttsUnitKind>,
}

/// Mono audio.
pub struct PolyttsAudio {
    wave: Waveform,
}

/// Owned array of floats, such as a speaker embedding.
pub struct PolyttsFloats {
    values: Vec<f32>,
}

struct Failure {
    status: PolyttsStatus,
    message: String,
}

impl Failure {
    fn new(status: PolyttsStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    fn null(name: &str) -> Self {
        Failure::new(PolyttsStatus::NullArgument, format!("`{name}` must not be null"))
    }
}

impl From<polytts::Error> for Failure {
    fn from(e: polytts::Error) -> Self {
        Failure::new(status_of(&e), e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let status = e
            .chain()
            .find_map(|c| {
                c.downcast_ref::<polytts::Error>()
                    .map(status_of)
                    .or_else(|| c.downcast_ref::<std::io::Error>().map(|_| PolyttsStatus::Io))
            })
            .unwrap_or(PolyttsStatus::Config);
        Failure::new(status, format!("{e:#}"))
    }
}

fn status_of(e: &polytts::Error) -> PolyttsStatus {
    use polytts::Error as E;
    match e {
        E::Config(_) => PolyttsStatus::Config,
        E::UnknownSymbol { .. } => PolyttsStatus::UnknownSymbol,
        E::G2p { .. } => PolyttsStatus::G2p,
        E::Parse { .. } => PolyttsStatus::Parse,
        E::Shape(_) => PolyttsStatus::Shape,
        E::Contract(_) => PolyttsStatus::Contract,
        E::Audio { .. } => PolyttsStatus::Audio,
        E::Alignment { .. } => PolyttsStatus::Alignment,
        E::EmptyTask(_) => PolyttsStatus::EmptyTask,
        E::Checkpoint { .. } => PolyttsStatus::Checkpoint,
        E::ZeroNorm => PolyttsStatus::ZeroNorm,
        E::Io(_) => PolyttsStatus::Io,
        E::Tensor(_) => PolyttsStatus::Tensor,
        E::Json(_) => PolyttsStatus::Json,
        E::Wav(_) => PolyttsStatus::Wav,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PolyttsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            PolyttsStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            PolyttsStatus::Panic
        }
    }
}

fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    // SAFETY: caller passes a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(PolyttsStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    str_arg(p, name).map(PathBuf::from)
}

/// Slice view of a caller buffer; a zero length accepts a null pointer.
fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(name));
    }
    // SAFETY: caller guarantees `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_out<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::null(name));
    }
    // SAFETY: caller guarantees `len` writable elements.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles come from this library and are not yet freed.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::null(name))
}

fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(name));
    }
    // SAFETY: checked non-null; caller provides a writable slot.
    unsafe { out.write(value) };
    Ok(())
}

fn put_box<T>(out: *mut *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(name));
    }
    // SAFETY: checked non-null; ownership passes to the caller.
    unsafe { out.write(Box::into_raw(Box::new(value))) };
    Ok(())
}

/// # Safety
/// `p` is null or came from `Box::into_raw` and has not been freed.
unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn check_out<T>(out: *mut T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::null(name))
    } else {
        Ok(())
    }
}

fn units_from(seq: &PhoneSequence) -> PolyttsUnits {
    use polytts::frontend::UnitKind;
    let kinds = seq
        .units()
        .iter()
        .map(|u| match u.kind {
            UnitKind::Phoneme => PolyttsUnitKind::Phoneme,
            UnitKind::WordBoundary => PolyttsUnitKind::WordBoundary,
            UnitKind::Pause => PolyttsUnitKind::Pause,
            UnitKind::SentenceMark => PolyttsUnitKind::SentenceMark,
        })
        .collect();
    let symbols = seq
        .symbols()
        .into_iter()
        .map(|s| CString::new(s).unwrap_or_default())
        .collect();
    PolyttsUnits { symbols, kinds }
}

fn resolve_system(sys: &PolyttsSystem, language: &str) -> Result<polytts::LanguageId, Failure> {
    Ok(sys.system.resolve_language(language)?)
}

// ── library ─────────────────────────────────────────────────────────────────

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn polytts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version tag, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn polytts_version() -> *const c_char {
    static VERSION: std::sync::OnceLock<CString> = std::sync::OnceLock::new();
    VERSION
        .get_or_init(|| CString::new(polytts::VERSION_TAG).unwrap_or_default())
        .as_ptr()
}

/// Sample rate of every waveform this library produces.
#[no_mangle]
pub extern "C" fn polytts_sample_rate() -> u32 {
    SAMPLE_RATE
}

// ── system ──────────────────────────────────────────────────────────────────

/// Loads a model checkpoint. `config_path` may be null for the default
/// run configuration.
///
/// # Safety
/// String arguments are null or NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_load(
    config_path: *const c_char,
    checkpoint_path: *const c_char,
    out: *mut *mut PolyttsSystem,
) -> PolyttsStatus {
    guard(|| {
        check_out(out, "out")?;
        let cfg = if config_path.is_null() {
            RunConfig::default()
        } else {
            RunConfig::load(&path_arg(config_path, "config_path")?)?
        };
        let checkpoint = path_arg(checkpoint_path, "checkpoint_path")?;
        let system = cfg.load_system(&checkpoint)?;
        let embedder = cfg.embedder.build()?;
        put_box(out, PolyttsSystem { system, embedder }, "out")
    })
}

/// # Safety
/// `system` is null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_free(system: *mut PolyttsSystem) {
    free_box(system);
}

/// Number of languages the model knows.
///
/// # Safety
/// `system` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_language_count(system: *const PolyttsSystem, out: *mut usize) -> PolyttsStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        put(out, sys.system.model.meta.languages.len(), "out")
    })
}

/// Numeric id for a language name or id string.
///
/// # Safety
/// `system` is a live handle; `language` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_language_id(
    system: *const PolyttsSystem,
    language: *const c_char,
    out: *mut u32,
) -> PolyttsStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        let id = resolve_system(sys, str_arg(language, "language")?)?;
        put(out, id.0, "out")
    })
}

/// Length of the speaker vectors the model expects.
///
/// # Safety
/// `system` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_speaker_dim(system: *const PolyttsSystem, out: *mut usize) -> PolyttsStatus {
    guard(|| {
        let sys = handle(system, "system")?;
        put(out, sys.system.model.meta.config.speaker_dim, "out")
    })
}

/// Converts text to units with the system's frontend.
///
/// # Safety
/// `system` is a live handle; strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_text_to_units(
    system: *const PolyttsSystem,
    text: *const c_char,
    language: *const c_char,
    out: *mut *mut PolyttsUnits,
) -> PolyttsStatus {
    guard(|| {
        check_out(out, "out")?;
        let sys = handle(system, "system")?;
        let language = resolve_system(sys, str_arg(language, "language")?)?;
        let seq = sys.system.frontend.text_to_units(str_arg(text, "text")?, language)?;
        put_box(out, units_from(&seq), "out")
    })
}

/// Speaker embedding of a WAV file, resampled to the library rate if needed.
///
/// # Safety
/// `system` is a live handle; `wav_path` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_embed_wav(
    system: *const PolyttsSystem,
    wav_path: *const c_char,
    out: *mut *mut PolyttsFloats,
) -> PolyttsStatus {
    guard(|| {
        check_out(out, "out")?;
        let sys = handle(system, "system")?;
        let wave = read_wav(path_arg(wav_path, "wav_path")?)?;
        let wave = if wave.sample_rate == SAMPLE_RATE { wave } else { wave.resample(SAMPLE_RATE) };
        let e = embed(&*sys.embedder, &wave)?;
        put_box(out, PolyttsFloats { values: e.vector }, "out")
    })
}

/// Synthesizes `text` in `language` for the speaker vector `speaker`.
///
/// # Safety
/// `system` is a live handle; strings are NUL-terminated; `speaker` holds
/// `speaker_len` floats; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_system_synthesize(
    system: *const PolyttsSystem,
    text: *const c_char,
    language: *const c_char,
    speaker: *const f32,
    speaker_len: usize,
    out: *mut *mut PolyttsAudio,
) -> PolyttsStatus {
    guard(|| {
        check_out(out, "out")?;
        let sys = handle(system, "system")?;
        let language = resolve_system(sys, str_arg(language, "language")?)?;
        let speaker = slice_arg(speaker, speaker_len, "speaker")?;
        let result = sys.system.synthesize(str_arg(text, "text")?, language, speaker)?;
        put_box(out, PolyttsAudio { wave: result.audio }, "out")
    })
}

// ── units ───────────────────────────────────────────────────────────────────

/// # Safety
/// `units` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn polytts_units_len(units: *const PolyttsUnits) -> usize {
    units.as_ref().map_or(0, |u| u.symbols.len())
}

/// Symbol of unit `index`, or null when out of range. Owned by the handle.
///
/// # Safety
/// `units` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn polytts_units_symbol(units: *const PolyttsUnits, index: usize) -> *const c_char {
    units
        .as_ref()
        .and_then(|u| u.symbols.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Kind of unit `index`.
///
/// # Safety
/// `units` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_units_kind(
    units: *const PolyttsUnits,
    index: usize,
    out: *mut PolyttsUnitKind,
) -> PolyttsStatus {
    guard(|| {
        let u = handle(units, "units")?;
        let kind = *u
            .kinds
            .get(index)
            .ok_or_else(|| Failure::new(PolyttsStatus::Shape, format!("unit index {index} out of range")))?;
        put(out, kind, "out")
    })
}

/// # Safety
/// `units` is null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polytts_units_free(units: *mut PolyttsUnits) {
    free_box(units);
}

// ── audio ───────────────────────────────────────────────────────────────────

/// # Safety
/// `audio` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn polytts_audio_len(audio: *const PolyttsAudio) -> usize {
    audio.as_ref().map_or(0, |a| a.wave.samples.len())
}

/// Samples owned by the handle; `polytts_audio_len` gives the count.
///
/// # Safety
/// `audio` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn polytts_audio_samples(audio: *const PolyttsAudio) -> *const f32 {
    audio.as_ref().map_or(ptr::null(), |a| a.wave.samples.as_ptr())
}

/// # Safety
/// `audio` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn polytts_audio_sample_rate(audio: *const PolyttsAudio) -> u32 {
    audio.as_ref().map_or(0, |a| a.wave.sample_rate)
}

/// Writes the audio as a 16-bit mono WAV file.
///
/// # Safety
/// `audio` is a live handle; `path` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn polytts_audio_write_wav(audio: *const PolyttsAudio, path: *const c_char) -> PolyttsStatus {
    guard(|| {
        let a = handle(audio, "audio")?;
        let path = path_arg(path, "path")?;
        if let Some(dir) = Path::new(&path).parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(polytts::Error::from)?;
        }
        Ok(write_wav(&path, &a.wave)?)
    })
}

/// # Safety
/// `audio` is null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polytts_audio_free(audio: *mut PolyttsAudio) {
    free_box(audio);
}

// ── float arrays ────────────────────────────────────────────────────────────

/// # Safety
/// `floats` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn polytts_floats_len(floats: *const PolyttsFloats) -> usize {
    floats.as_ref().map_or(0, |f| f.values.len())
}

/// Values owned by the handle; `polytts_floats_len` gives the count.
///
/// # Safety
/// `floats` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn polytts_floats_data(floats: *const PolyttsFloats) -> *const f32 {
    floats.as_ref().map_or(ptr::null(), |f| f.values.as_ptr())
}

/// # Safety
/// `floats` is null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polytts_floats_free(floats: *mut PolyttsFloats) {
    free_box(floats);
}

// ── stateless algorithms ────────────────────────────────────────────────────

/// Cosine similarity of two equal-length vectors, in [-1, 1].
///
/// # Safety
/// `a` and `b` hold `len` floats; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_cosine(a: *const f32, b: *const f32, len: usize, out: *mut f64) -> PolyttsStatus {
    guard(|| {
        let a = slice_arg(a, len, "a")?;
        let b = slice_arg(b, len, "b")?;
        let ea = polytts::speaker::SpeakerEmbedding::new(a.to_vec(), "ffi")?;
        let eb = polytts::speaker::SpeakerEmbedding::new(b.to_vec(), "ffi")?;
        put(out, polytts::speaker::cosine_similarity(&ea, &eb)?, "out")
    })
}

/// Monotonic alignment search over a row-major `frames × units` score
/// matrix. Writes the number of frames per unit to `durations`.
///
/// # Safety
/// `scores` holds `frames * units` doubles; `durations` has room for `units`.
#[no_mangle]
pub unsafe extern "C" fn polytts_mas(
    scores: *const f64,
    frames: usize,
    units: usize,
    durations: *mut u32,
) -> PolyttsStatus {
    guard(|| {
        let n = frames
            .checked_mul(units)
            .ok_or_else(|| Failure::new(PolyttsStatus::Shape, "score matrix size overflows"))?;
        let scores = slice_arg(scores, n, "scores")?;
        let view = ndarray::ArrayView2::from_shape((frames, units), scores)
            .map_err(|e| Failure::new(PolyttsStatus::Shape, e.to_string()))?;
        let path = polytts::aligner::mas(view)?;
        let d = polytts::aligner::durations_from_path(&path, units)?;
        slice_out(durations, units, "durations")?.copy_from_slice(&d);
        Ok(())
    })
}

/// Mean of frame values over each unit's span. With `exclude_zeros`, zero
/// frames are skipped and a unit with none left gets 0.
///
/// # Safety
/// `values` holds `frames` floats, `durations` holds `units` entries and
/// `out` has room for `units` floats.
#[no_mangle]
pub unsafe extern "C" fn polytts_phoneme_average(
    values: *const f32,
    frames: usize,
    durations: *const u32,
    units: usize,
    exclude_zeros: bool,
    out: *mut f32,
) -> PolyttsStatus {
    guard(|| {
        let values = slice_arg(values, frames, "values")?;
        let durations = slice_arg(durations, units, "durations")?;
        let avg = polytts::data::phoneme_average(values, durations, exclude_zeros)?;
        slice_out(out, units, "out")?.copy_from_slice(&avg);
        Ok(())
    })
}

/// Edit-distance error rate in percent between two symbol sequences.
///
/// # Safety
/// `reference` and `hypothesis` hold the given number of NUL-terminated
/// strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn polytts_error_rate(
    reference: *const *const c_char,
    reference_len: usize,
    hypothesis: *const *const c_char,
    hypothesis_len: usize,
    out: *mut f64,
) -> PolyttsStatus {
    guard(|| {
        let collect = |p, len, name: &str| -> Result<Vec<&str>, Failure> {
            slice_arg(p, len, name)?.iter().map(|&s| str_arg(s, name)).collect()
        };
        let r = collect(reference, reference_len, "reference")?;
        let h = collect(hypothesis, hypothesis_len, "hypothesis")?;
        put(out, polytts::eval::error_rate(&r, &h), "out")
    })
}
