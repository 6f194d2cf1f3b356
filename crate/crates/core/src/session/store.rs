//! On-disk episode log. One directory per episode:
//!
//! ```text
//! <root>/<episode_id>/episode.json        id, policy, status
//! <root>/<episode_id>/session_<i>.json    one document per closed session
//! <root>/<episode_id>/open_session.json   the session in progress
//! <root>/<episode_id>/memory_latest.json  memory carried into the next session
//! <root>/<episode_id>/episode.jsonl       canonical dataset form
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Episode, EpisodeStatus, MemoryPolicy, Session, SessionError};
use crate::dataset::write_episodes;

#[derive(Serialize, Deserialize)]
struct Meta {
    episode_id: String,
    policy: MemoryPolicy,
    status: EpisodeStatus,
}

#[derive(Debug, Clone)]
pub struct EpisodeStore {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SessionError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SessionError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| SessionError::Corrupt {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SessionError> {
    let src = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&src).map_err(|e| SessionError::Corrupt {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

impl EpisodeStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        EpisodeStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn episode_dir(&self, episode_id: &str) -> PathBuf {
        self.root.join(episode_id)
    }

    fn ensure_dir(&self, episode_id: &str) -> Result<PathBuf, SessionError> {
        let dir = self.episode_dir(episode_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(dir)
    }

    pub fn save_meta(&self, episode: &Episode) -> Result<(), SessionError> {
        let dir = self.ensure_dir(&episode.episode_id)?;
        write_json(
            &dir.join("episode.json"),
            &Meta {
                episode_id: episode.episode_id.clone(),
                policy: episode.policy,
                status: episode.status,
            },
        )?;
        if episode.status == EpisodeStatus::Closed {
            let open = dir.join("open_session.json");
            if open.exists() {
                fs::remove_file(&open).map_err(io_err(&open))?;
            }
        }
        Ok(())
    }

    /// Writes the open session's transcript.
    pub fn save_open(&self, episode: &Episode) -> Result<(), SessionError> {
        let dir = self.ensure_dir(&episode.episode_id)?;
        self.save_meta(episode)?;
        if let Some(open) = episode.current() {
            write_json(&dir.join("open_session.json"), open)?;
        }
        Ok(())
    }

    /// Persists a session boundary. `episode` is the state before the close.
    pub fn persist_close(&self, episode: &Episode, closed: &Session, next: &Session) -> Result<(), SessionError> {
        let dir = self.ensure_dir(&episode.episode_id)?;
        write_json(&dir.join(format!("session_{}.json", closed.session_index)), closed)?;
        write_json(&dir.join("open_session.json"), next)?;
        write_json(&dir.join("memory_latest.json"), &next.memory_before)?;

        let mut after = episode.clone();
        if let Some(last) = after.sessions.last_mut() {
            *last = closed.clone();
        }
        let mut buf = Vec::new();
        write_episodes(&mut buf, &[after.to_record()]).map_err(io_err(&dir))?;
        write_atomic(&dir.join("episode.jsonl"), &buf)?;
        self.save_meta(episode)
    }

    pub fn load(&self, episode_id: &str) -> Result<Episode, SessionError> {
        let dir = self.episode_dir(episode_id);
        let meta: Meta = read_json(&dir.join("episode.json"))?;
        let mut sessions: Vec<Session> = Vec::new();
        loop {
            let path = dir.join(format!("session_{}.json", sessions.len() + 1));
            if !path.exists() {
                break;
            }
            let s: Session = read_json(&path)?;
            if s.session_index as usize != sessions.len() + 1 || !s.is_closed() {
                return Err(SessionError::Corrupt {
                    path,
                    message: "session file does not hold the expected closed session".into(),
                });
            }
            sessions.push(s);
        }
        if meta.status == EpisodeStatus::Open {
            let path = dir.join("open_session.json");
            let expected = sessions.len() as u32 + 1;
            let open = if path.exists() {
                Some(read_json::<Session>(&path)?).filter(|s| s.session_index == expected)
            } else {
                None
            };
            let open = match open {
                Some(s) => s,
                // closed session written but the open one was not
                None => Session::open(
                    expected,
                    0,
                    sessions
                        .last()
                        .and_then(|s| s.memory_after.clone())
                        .unwrap_or_else(|| crate::memory::MemoryState::empty(expected)),
                ),
            };
            sessions.push(open);
        }
        Ok(Episode {
            episode_id: meta.episode_id,
            policy: meta.policy,
            status: meta.status,
            sessions,
        })
    }
}
