//! Chain builders for unit tests.

use std::sync::Arc;

use super::{
    threshold, AdjustRecord, Block, BlockBody, Chain, ChainParams, EmbeddedAdjust, GenesisBlock,
    LeaderCert, PrefixState, SealedBlock, StakeHolder, Tx,
};
use crate::crypto::{hash_parts, vrf_eval, vrf_input, KesKey, KeyRegistry, VrfKeypair, NONCE, TEST};
use crate::types::{epoch_of, PartyId, Slot, Tick};

pub struct World {
    pub genesis: Arc<GenesisBlock>,
    pub params: ChainParams,
    pub registry: KeyRegistry,
    pub vrf: Vec<VrfKeypair>,
    pub kes: Vec<KesKey>,
}

impl World {
    pub fn new(n: u32, f: f64, epoch_len: u64) -> Self {
        Self::with_seed(n, f, epoch_len, 7)
    }

    pub fn with_seed(n: u32, f: f64, epoch_len: u64, seed: u64) -> Self {
        let params = ChainParams {
            epoch_len,
            f,
            ..ChainParams::default()
        };
        let mut registry = KeyRegistry::new(params.l_vrf);
        let vrf: Vec<_> = (0..n).map(|p| VrfKeypair::derive(seed, p)).collect();
        let kes: Vec<_> = (0..n).map(|p| KesKey::derive(seed, p)).collect();
        for (v, k) in vrf.iter().zip(&kes) {
            registry.register_vrf(v);
            registry.register_kes(k);
        }
        let stakeholders = (0..n)
            .map(|p| StakeHolder {
                id: p,
                vrf_key: vrf[p as usize].public,
                kes_key: kes[p as usize].public,
                stake: 100,
            })
            .collect();
        let genesis = GenesisBlock {
            stakeholders,
            nonce: hash_parts(&[b"test-nonce", &seed.to_be_bytes()]),
            t_start: 0,
            t_round_1: 10,
        };
        Self {
            genesis: Arc::new(genesis),
            params,
            registry,
            vrf,
            kes,
        }
    }

    pub fn stake_of(&self, p: PartyId) -> u64 {
        self.genesis.holder(p).unwrap().stake
    }

    pub fn honest_chain(&self, slots: &[Slot]) -> Chain {
        let c = self.honest_chain_unchecked(slots);
        super::check_chain(&c, &self.genesis, Tick::MAX, &self.params, &self.registry)
            .expect("builder produced an invalid chain");
        c
    }

    pub fn honest_chain_unchecked(&self, slots: &[Slot]) -> Chain {
        self.chain_with(slots, |_| vec![], |_| vec![])
    }

    /// Builds one block per slot, led by the first eligible party starting
    /// from `slot mod n`.
    pub fn chain_with(
        &self,
        slots: &[Slot],
        txs: impl Fn(Slot) -> Vec<Tx>,
        adjusts: impl Fn(Slot) -> Vec<EmbeddedAdjust>,
    ) -> Chain {
        let g = &self.genesis;
        let mut chain = Chain::new(g.clone());
        let mut st = PrefixState::genesis(g);
        for &sl in slots {
            let info = st.epoch_info(epoch_of(sl, self.params.epoch_len), g, &self.params);
            let n = self.vrf.len() as u32;
            let (party, crt) = (0..n)
                .map(|i| (sl as u32 + i) % n)
                .find_map(|p| {
                    let out = vrf_eval(&self.vrf[p as usize], &vrf_input(&info.nonce, sl, TEST), self.params.l_vrf);
                    let t = threshold(self.params.f, info.dist.relative(p), self.params.l_vrf).unwrap();
                    ((out.y as u128) < t).then_some((p, out))
                })
                .expect("no eligible leader for slot");
            let rho = vrf_eval(&self.vrf[party as usize], &vrf_input(&info.nonce, sl, NONCE), self.params.l_vrf);
            let body = BlockBody {
                prev: chain.head_hash(),
                txs: txs(sl),
                slot: sl,
                t_now: info.slot_start(sl, self.params.epoch_len),
                crt: LeaderCert { party, y: crt.y, proof: crt.proof },
                rho,
                adjusts: adjusts(sl),
            };
            let sig = self.kes[party as usize].clone().sign(&body.signing_bytes(), sl).unwrap();
            let b = Arc::new(SealedBlock::seal(Block { body, sig }));
            st.absorb(&b, g, &self.params);
            chain.push(b);
        }
        chain
    }

    /// A complete record for `party`, leader at the head slot of `chain`.
    pub fn adjust_record(&self, chain: &Chain, party: PartyId, recv: Tick) -> AdjustRecord {
        let head = chain.head().expect("non-empty chain");
        let st = PrefixState::from_chain(chain, &self.genesis, &self.params);
        let info = st.epoch_info(epoch_of(head.slot(), self.params.epoch_len), &self.genesis, &self.params);
        let out = vrf_eval(&self.vrf[party as usize], &vrf_input(&info.nonce, head.slot(), TEST), self.params.l_vrf);
        AdjustRecord {
            last: Some(head.block_ref()),
            recv: Some(recv),
            party,
            slot: head.slot(),
            y: out.y,
            proof: out.proof,
        }
    }
}
