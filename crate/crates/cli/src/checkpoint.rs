//! `checkpoint.bin`: run position and reset log followed by the agent.
//!
//! ```text
//! magic "HRQRUN", version u32
//! env_step u64, env id (u32 length + utf8), family u8
//! total_env_steps u64, num_resets u64, fired count u64, fired u64 * count
//! agent snapshot
//! ```

use anyhow::{bail, Context, Result};
use hredq_core::agent::{decode_agent, encode_agent, Agent};

use crate::config::Family;

const MAGIC: &[u8; 6] = b"HRQRUN";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub env_step: u64,
    pub env: String,
    pub family: Family,
    pub total_env_steps: u64,
    pub num_resets: usize,
    pub fired_resets: Vec<u64>,
    pub agent: Agent,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.env_step.to_le_bytes());
        out.extend_from_slice(&(self.env.len() as u32).to_le_bytes());
        out.extend_from_slice(self.env.as_bytes());
        out.push(match self.family {
            Family::Redq => 0,
            Family::Reset => 1,
        });
        out.extend_from_slice(&self.total_env_steps.to_le_bytes());
        out.extend_from_slice(&(self.num_resets as u64).to_le_bytes());
        out.extend_from_slice(&(self.fired_resets.len() as u64).to_le_bytes());
        for s in &self.fired_resets {
            out.extend_from_slice(&s.to_le_bytes());
        }
        encode_agent(&self.agent, &mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if pos + n > bytes.len() {
                bail!("checkpoint truncated");
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        if take(6)? != MAGIC {
            bail!("not a run checkpoint");
        }
        let version = u32::from_le_bytes(take(4)?.try_into()?);
        if version != VERSION {
            bail!("unsupported checkpoint version {version}");
        }
        let env_step = u64::from_le_bytes(take(8)?.try_into()?);
        let len = u32::from_le_bytes(take(4)?.try_into()?) as usize;
        let env = String::from_utf8(take(len)?.to_vec()).context("env id")?;
        let family = match take(1)?[0] {
            0 => Family::Redq,
            1 => Family::Reset,
            f => bail!("unknown family tag {f}"),
        };
        let total_env_steps = u64::from_le_bytes(take(8)?.try_into()?);
        let num_resets = u64::from_le_bytes(take(8)?.try_into()?) as usize;
        let fired = u64::from_le_bytes(take(8)?.try_into()?) as usize;
        if fired > num_resets {
            bail!("{fired} fired resets exceed the schedule of {num_resets}");
        }
        let mut fired_resets = Vec::with_capacity(fired);
        for _ in 0..fired {
            fired_resets.push(u64::from_le_bytes(take(8)?.try_into()?));
        }
        let (agent, used) =
            decode_agent(&bytes[pos..]).map_err(|e| anyhow::anyhow!("agent: {e}"))?;
        if pos + used != bytes.len() {
            bail!(
                "{} trailing bytes after the agent",
                bytes.len() - pos - used
            );
        }
        Ok(Self {
            env_step,
            env,
            family,
            total_env_steps,
            num_resets,
            fired_resets,
            agent,
        })
    }

    /// Writes through a temporary file so a crash never leaves a torn
    /// checkpoint behind.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let tmp = path.with_extension("bin.tmp");
        std::fs::write(&tmp, self.encode())
            .with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        Self::decode(&bytes).with_context(|| format!("decoding {}", path.display()))
    }
}
