//! Binary agent snapshot: configuration, every network, every optimizer
//! state and the temperature, so training resumes bit-for-bit.
//!
//! ```text
//! magic "HRQA", version u32
//! config, dims
//! policy net, policy adam
//! N x (online net, target net, adam)
//! temperature fields, optional adam
//! ```

use alloc::format;
use alloc::vec::Vec;

use super::temperature::{temperature_fields, temperature_from_fields};
use super::{
    Agent, AgentConfig, AlphaMode, Dims, EnsembleCritic, SquashedGaussianPolicy, TargetMode,
};
use crate::nn::snapshot::Reader;
use crate::nn::{decode_snapshot, encode_snapshot, AdamState, MlpNet};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"HRQA";
const VERSION: u32 = 1;

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_net(out: &mut Vec<u8>, net: &MlpNet) {
    encode_snapshot(net, out);
}

fn put_adam(out: &mut Vec<u8>, a: &AdamState) {
    put_u64(out, a.first_moment.len() as u64);
    put_u64(out, a.step_count);
    for v in [a.learning_rate, a.beta1, a.beta2, a.epsilon] {
        put_f64(out, v);
    }
    for v in a.first_moment.iter().chain(&a.second_moment) {
        put_f64(out, *v);
    }
}

fn get_net(r: &mut Reader) -> Result<MlpNet> {
    let (net, used) = decode_snapshot(&r.bytes[r.pos..])?;
    r.pos += used;
    Ok(net)
}

fn get_adam(r: &mut Reader, expected_len: usize) -> Result<AdamState> {
    let n = r.u64()? as usize;
    if n != expected_len {
        return Err(Error::Decode(format!(
            "optimizer size {n}, network has {expected_len}"
        )));
    }
    let mut a = AdamState::new(n, 0.0);
    a.step_count = r.u64()?;
    a.learning_rate = r.f64()?;
    a.beta1 = r.f64()?;
    a.beta2 = r.f64()?;
    a.epsilon = r.f64()?;
    for v in a.first_moment.iter_mut() {
        *v = r.f64()?;
    }
    for v in a.second_moment.iter_mut() {
        *v = r.f64()?;
    }
    Ok(a)
}

fn get_usize(r: &mut Reader) -> Result<usize> {
    Ok(r.u64()? as usize)
}

fn put_config(out: &mut Vec<u8>, c: &AgentConfig) {
    for v in [
        c.ensemble_size,
        c.target_subset,
        c.replay_ratio,
        c.batch_size,
        c.hidden_layers,
        c.hidden_units,
    ] {
        put_u64(out, v as u64);
    }
    for v in [c.gamma, c.tau, c.q_min, c.q_max, c.learning_rate] {
        put_f64(out, v);
    }
    out.push(c.use_bq as u8);
    out.push(c.use_layer_norm as u8);
    out.push(match c.target_mode {
        TargetMode::CdqEntropy => 0,
        TargetMode::EnsembleMean => 1,
    });
    match c.alpha_mode {
        AlphaMode::Auto { initial } => {
            out.push(0);
            put_f64(out, initial);
        }
        AlphaMode::Fixed(v) => {
            out.push(1);
            put_f64(out, v);
        }
    }
}

fn get_config(r: &mut Reader) -> Result<AgentConfig> {
    let ensemble_size = get_usize(r)?;
    let target_subset = get_usize(r)?;
    let replay_ratio = get_usize(r)?;
    let batch_size = get_usize(r)?;
    let hidden_layers = get_usize(r)?;
    let hidden_units = get_usize(r)?;
    let gamma = r.f64()?;
    let tau = r.f64()?;
    let q_min = r.f64()?;
    let q_max = r.f64()?;
    let learning_rate = r.f64()?;
    let use_bq = r.u8()? != 0;
    let use_layer_norm = r.u8()? != 0;
    let target_mode = match r.u8()? {
        0 => TargetMode::CdqEntropy,
        1 => TargetMode::EnsembleMean,
        m => return Err(Error::Decode(format!("target mode {m}"))),
    };
    let alpha_mode = match (r.u8()?, r.f64()?) {
        (0, initial) => AlphaMode::Auto { initial },
        (1, v) => AlphaMode::Fixed(v),
        (m, _) => return Err(Error::Decode(format!("alpha mode {m}"))),
    };
    Ok(AgentConfig {
        ensemble_size,
        target_subset,
        replay_ratio,
        gamma,
        tau,
        q_min,
        q_max,
        use_bq,
        target_mode,
        use_layer_norm,
        alpha_mode,
        batch_size,
        learning_rate,
        hidden_layers,
        hidden_units,
    })
}

pub fn encode_agent(agent: &Agent, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_config(out, &agent.config);
    for d in [agent.dims.state, agent.dims.action, agent.dims.goal] {
        put_u64(out, d as u64);
    }
    put_net(out, &agent.policy.net);
    put_adam(out, &agent.policy.optimizer);
    put_u64(out, agent.critic.len() as u64);
    for i in 0..agent.critic.len() {
        put_net(out, &agent.critic.online[i]);
        put_net(out, &agent.critic.targets[i]);
        put_adam(out, &agent.critic.optimizers[i]);
    }
    for v in temperature_fields(&agent.temperature) {
        put_f64(out, v);
    }
    match &agent.temperature.optimizer {
        Some(a) => {
            out.push(1);
            put_adam(out, a);
        }
        None => out.push(0),
    }
}

/// Decodes an agent from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn decode_agent(bytes: &[u8]) -> Result<(Agent, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Decode("not an agent checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Decode(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config = get_config(&mut r)?;
    config
        .validate()
        .map_err(|e| Error::Decode(format!("{e}")))?;
    let dims = Dims {
        state: get_usize(&mut r)?,
        action: get_usize(&mut r)?,
        goal: get_usize(&mut r)?,
    };
    let net = get_net(&mut r)?;
    let optimizer = get_adam(&mut r, net.num_params())?;
    let policy = SquashedGaussianPolicy {
        net,
        optimizer,
        state_dim: dims.state,
        goal_dim: dims.goal,
        action_dim: dims.action,
    };
    let n = get_usize(&mut r)?;
    if n != config.ensemble_size {
        return Err(Error::Decode(format!(
            "{n} critics, config says {}",
            config.ensemble_size
        )));
    }
    let mut critic = EnsembleCritic {
        online: Vec::with_capacity(n),
        targets: Vec::with_capacity(n),
        optimizers: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let online = get_net(&mut r)?;
        let target = get_net(&mut r)?;
        let adam = get_adam(&mut r, online.num_params())?;
        critic.online.push(online);
        critic.targets.push(target);
        critic.optimizers.push(adam);
    }
    let fields = [r.f64()?, r.f64()?, r.f64()?];
    let optimizer = match r.u8()? {
        0 => None,
        1 => Some(get_adam(&mut r, 1)?),
        f => return Err(Error::Decode(format!("temperature flag {f}"))),
    };
    let temperature = temperature_from_fields(fields, optimizer);
    Ok((
        Agent {
            config,
            dims,
            policy,
            critic,
            temperature,
        },
        r.pos,
    ))
}
