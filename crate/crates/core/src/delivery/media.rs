use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use parking_lot::RwLock;

use super::DeliveryError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaObject {
    pub content_type: String,
    pub bytes: Vec<u8>,
}

/// Blob store keyed by random 128-bit hex ids. Disk-backed when given a
/// directory, otherwise in memory.
#[derive(Debug, Default)]
pub struct MediaStore {
    dir: Option<PathBuf>,
    cache: RwLock<HashMap<String, MediaObject>>,
}

fn is_media_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

impl MediaStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self, DeliveryError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| DeliveryError::Media(e.to_string()))?;
        Ok(MediaStore {
            dir: Some(dir),
            cache: RwLock::default(),
        })
    }

    pub fn put(&self, content_type: &str, bytes: Vec<u8>) -> Result<String, DeliveryError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        if let Some(dir) = &self.dir {
            let io = |e: std::io::Error| DeliveryError::Media(e.to_string());
            fs::write(dir.join(format!("{id}.bin")), &bytes).map_err(io)?;
            fs::write(dir.join(format!("{id}.type")), content_type).map_err(io)?;
        }
        self.cache.write().insert(
            id.clone(),
            MediaObject {
                content_type: content_type.to_owned(),
                bytes,
            },
        );
        Ok(id)
    }

    /// Unknown or malformed ids yield `None`; ids never reach the filesystem
    /// unless they are well-formed.
    pub fn get(&self, id: &str) -> Option<MediaObject> {
        if !is_media_id(id) {
            return None;
        }
        if let Some(obj) = self.cache.read().get(id) {
            return Some(obj.clone());
        }
        let dir = self.dir.as_ref()?;
        let bytes = fs::read(dir.join(format!("{id}.bin"))).ok()?;
        let content_type = fs::read_to_string(dir.join(format!("{id}.type"))).ok()?;
        Some(MediaObject { content_type, bytes })
    }
}
