//! Model checkpoints.
//!
//! Layout: magic `RCKP`, u32 version, u32 manifest length, manifest JSON,
//! then every online network in [`write_net`] format: one per agent kind,
//! followed by the four mixer hypernetworks for QMIX.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentNets, AgentSpec, IqlModel, LearnerConfig, Mixer, Model, QmixModel};
use crate::config::Strategy;
use crate::error::{Error, Result};
use crate::nnet::{read_net, write_net};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub strategy: Strategy,
    pub specs: Vec<AgentSpec>,
    pub state_dim: usize,
    pub kind_networks: usize,
}

pub fn write_checkpoint<W: Write>(model: &Model, state_dim: usize, out: &mut W) -> Result<()> {
    let agents = model.agents();
    let manifest = CheckpointManifest {
        strategy: model.strategy(),
        specs: agents.specs().to_vec(),
        state_dim,
        kind_networks: agents.networks().count(),
    };
    let json = serde_json::to_vec(&manifest)?;
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for net in agents.networks() {
        write_net(net, out)?;
    }
    if let Model::Qmix(m) = model {
        for net in m.mixer.nets() {
            write_net(net, out)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R, config: LearnerConfig) -> Result<(CheckpointManifest, Model)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::validation("not a model checkpoint (bad magic)"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(Error::validation(format!("unsupported checkpoint version {version}")));
    }
    r.read_exact(&mut word)?;
    let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut json)?;
    let manifest: CheckpointManifest = serde_json::from_slice(&json)?;
    let nets = (0..manifest.kind_networks).map(|_| read_net(r)).collect::<Result<Vec<_>>>()?;
    let agents = AgentNets::from_networks(&manifest.specs, nets, config.lr)?;
    let model = match manifest.strategy {
        Strategy::Qmix => {
            let nets = [read_net(r)?, read_net(r)?, read_net(r)?, read_net(r)?];
            let mixer = Mixer::from_networks(manifest.specs.len(), nets)?;
            if mixer.state_dim() != manifest.state_dim {
                return Err(Error::validation("mixer state size disagrees with the manifest"));
            }
            Model::Qmix(QmixModel::from_parts(agents, mixer, config))
        }
        Strategy::Iql => Model::Iql(IqlModel::from_parts(agents, config)),
    };
    Ok((manifest, model))
}

pub fn save_checkpoint(path: &Path, model: &Model, state_dim: usize) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(model, state_dim, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointManifest, Model)> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice(), LearnerConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;
    use crate::marl::{agent_specs, state_dim};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qmix_and_iql_round_trip() {
        let specs = agent_specs(2, 3, 4);
        for strategy in [Strategy::Qmix, Strategy::Iql] {
            let cfg = TrainConfig {
                strategy,
                hidden: vec![6],
                mixer_embed: 3,
                hyper_hidden: 5,
                ..TrainConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let model = Model::build(&specs, state_dim(&specs), &cfg, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&model, state_dim(&specs), &mut buf).unwrap();
            let (manifest, back) = read_checkpoint(&mut buf.as_slice(), LearnerConfig::default()).unwrap();
            assert_eq!(manifest.strategy, strategy);
            assert_eq!(manifest.specs, specs);
            let a: Vec<_> = model.agents().networks().collect();
            let b: Vec<_> = back.agents().networks().collect();
            assert_eq!(a, b);
            if let (Model::Qmix(x), Model::Qmix(y)) = (&model, &back) {
                assert_eq!(x.mixer, y.mixer);
            }
        }
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        assert!(read_checkpoint(&mut &b"XXXX\x01\0\0\0"[..], LearnerConfig::default()).is_err());
        assert!(read_checkpoint(&mut &b"RCKP\x09\0\0\0"[..], LearnerConfig::default()).is_err());
        assert!(read_checkpoint(&mut &b"RCKP\x01\0\0\0\x02\0\0\0{}"[..], LearnerConfig::default()).is_err());
    }
}
