//! On-disk feature cache keyed by content hash.
//!
//! The key digests the audio bytes, the transcript and the extraction
//! config hash, so any change to one of them is a miss rather than a stale
//! hit. Entries are written atomically and can be shared by concurrent
//! writers.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::container::{ArrayData, Container};
use crate::data::features::{FeatureConfig, FrameFeatures};
use crate::data::manifest::{CorpusManifest, UtteranceRecord};
use crate::data::prosody::{AcousticFeatures, ProsodyStats};
use crate::error::{Error, Result};

const FRAMES_KIND: &str = "frame-features";
const ACOUSTIC_KIND: &str = "acoustic-features";

#[derive(Debug, Clone)]
pub struct FeatureCache {
    root: PathBuf,
    config: FeatureConfig,
    config_hash: String,
}

impl FeatureCache {
    pub fn new(root: impl Into<PathBuf>, config: FeatureConfig) -> Self {
        let config_hash = config.hash();
        Self {
            root: root.into(),
            config,
            config_hash,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Content key for a record; reads the audio file.
    pub fn key(&self, manifest: &CorpusManifest, record: &UtteranceRecord) -> Result<String> {
        let path = manifest.resolve(record);
        let audio = std::fs::read(&path).map_err(|e| Error::Audio {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        Ok(self.key_for(&audio, &record.transcript))
    }

    pub fn key_for(&self, audio_bytes: &[u8], transcript: &str) -> String {
        let mut h = Sha256::new();
        h.update((audio_bytes.len() as u64).to_le_bytes());
        h.update(audio_bytes);
        h.update((transcript.len() as u64).to_le_bytes());
        h.update(transcript.as_bytes());
        h.update(self.config_hash.as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str, ext: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.{ext}"))
    }

    fn header(&self, kind: &str) -> serde_json::Value {
        json!({ "kind": kind, "config_hash": self.config_hash })
    }

    fn read_container(&self, path: &Path, kind: &str) -> Result<Option<Container>> {
        if !path.exists() {
            return Ok(None);
        }
        let c = Container::read(path)?;
        let hash_ok = c.meta.get("config_hash").and_then(|v| v.as_str()) == Some(&self.config_hash);
        if c.kind != kind || !hash_ok {
            return Ok(None);
        }
        Ok(Some(c))
    }

    pub fn write_frames(&self, key: &str, frames: &FrameFeatures) -> Result<()> {
        let mut c = Container::new(FRAMES_KIND, self.header(FRAMES_KIND));
        put_frames(&mut c, frames)?;
        c.write(self.path(key, "frames"))
    }

    /// `Ok(None)` signals a miss.
    pub fn read_frames(&self, key: &str) -> Result<Option<FrameFeatures>> {
        match self.read_container(&self.path(key, "frames"), FRAMES_KIND)? {
            Some(c) => Ok(Some(get_frames(&c)?)),
            None => Ok(None),
        }
    }

    pub fn write(&self, key: &str, features: &AcousticFeatures) -> Result<()> {
        features.validate()?;
        let mut meta = self.header(ACOUSTIC_KIND);
        meta["stats"] = serde_json::to_value(features.stats)?;
        let mut c = Container::new(ACOUSTIC_KIND, meta);
        put_frames(
            &mut c,
            &FrameFeatures {
                mel: features.mel.clone(),
                pitch: features.frame_pitch.clone(),
                energy: features.frame_energy.clone(),
            },
        )?;
        let u = features.units();
        c.insert("durations", vec![u], ArrayData::U32(features.durations.clone()))?;
        c.insert("unit_pitch", vec![u], ArrayData::F32(features.unit_pitch.clone()))?;
        c.insert("unit_energy", vec![u], ArrayData::F32(features.unit_energy.clone()))?;
        c.write(self.path(key, "feat"))
    }

    /// `Ok(None)` signals a miss.
    pub fn read(&self, key: &str) -> Result<Option<AcousticFeatures>> {
        let Some(c) = self.read_container(&self.path(key, "feat"), ACOUSTIC_KIND)? else {
            return Ok(None);
        };
        let frames = get_frames(&c)?;
        let stats: ProsodyStats = serde_json::from_value(
            c.meta
                .get("stats")
                .cloned()
                .ok_or_else(|| Error::config("cache entry lacks prosody stats"))?,
        )?;
        let feats = AcousticFeatures {
            mel: frames.mel,
            frame_pitch: frames.pitch,
            frame_energy: frames.energy,
            durations: c.u32("durations")?.1.to_vec(),
            unit_pitch: c.f32("unit_pitch")?.1.to_vec(),
            unit_energy: c.f32("unit_energy")?.1.to_vec(),
            stats,
        };
        feats.validate()?;
        Ok(Some(feats))
    }
}

fn put_frames(c: &mut Container, f: &FrameFeatures) -> Result<()> {
    let (t, m) = f.mel.dim();
    c.insert("mel", vec![t, m], ArrayData::F32(f.mel.iter().copied().collect()))?;
    c.insert("frame_pitch", vec![t], ArrayData::F32(f.pitch.clone()))?;
    c.insert("frame_energy", vec![t], ArrayData::F32(f.energy.clone()))?;
    Ok(())
}

fn get_frames(c: &Container) -> Result<FrameFeatures> {
    let (shape, mel) = c.f32("mel")?;
    if shape.len() != 2 {
        return Err(Error::shape("cached mel is not 2-D"));
    }
    let mel = Array2::from_shape_vec((shape[0], shape[1]), mel.to_vec())
        .map_err(|e| Error::shape(e.to_string()))?;
    let frames = FrameFeatures {
        mel,
        pitch: c.f32("frame_pitch")?.1.to_vec(),
        energy: c.f32("frame_energy")?.1.to_vec(),
    };
    if frames.pitch.len() != frames.frames() || frames.energy.len() != frames.frames() {
        return Err(Error::shape("cached frame vectors disagree with mel"));
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AcousticFeatures {
        let mel = Array2::from_shape_fn((6, 4), |(t, m)| (t * 4 + m) as f32 * 0.37 - 2.0);
        let frames = FrameFeatures {
            mel,
            pitch: vec![0.0, 120.0, 121.5, 0.0, 98.0, 99.0],
            energy: vec![0.1, 0.5, 0.7, 0.2, 0.4, 0.3],
        };
        AcousticFeatures::from_alignment(frames, vec![2, 0, 3, 1]).unwrap()
    }

    #[test]
    fn write_then_read_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path(), FeatureConfig::default());
        let key = cache.key_for(b"audio", "text");
        let f = sample();
        cache.write(&key, &f).unwrap();
        assert_eq!(cache.read(&key).unwrap().unwrap(), f);
    }

    #[test]
    fn missing_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path(), FeatureConfig::default());
        assert!(cache.read(&cache.key_for(b"x", "y")).unwrap().is_none());
        assert!(cache.read_frames(&cache.key_for(b"x", "y")).unwrap().is_none());
    }

    #[test]
    fn changed_hop_misses() {
        let dir = tempfile::tempdir().unwrap();
        let a = FeatureCache::new(dir.path(), FeatureConfig::default());
        let b = FeatureCache::new(
            dir.path(),
            FeatureConfig {
                hop: 200,
                ..FeatureConfig::default()
            },
        );
        let key = a.key_for(b"audio", "text");
        a.write(&key, &sample()).unwrap();
        assert_ne!(key, b.key_for(b"audio", "text"));
        assert!(b.read(&b.key_for(b"audio", "text")).unwrap().is_none());
        // same file name, different config hash in the header: still a miss
        assert!(b.read(&key).unwrap().is_none());
    }

    #[test]
    fn transcript_is_part_of_the_key() {
        let cache = FeatureCache::new("/tmp", FeatureConfig::default());
        assert_ne!(cache.key_for(b"a", "x"), cache.key_for(b"a", "y"));
    }
}
