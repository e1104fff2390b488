//! Versioned little-endian binary layout for fitted models; see
//! `docs/model-format.md`.

use std::io::{Read, Write};

use super::boost::BoostedModel;
use super::features::FeatureInfo;
use super::split::SplitRule;
use super::tree::{Node, RegressionTree};
use crate::error::{Error, Result};
use crate::ingest::CovariateKind;

pub const MAGIC: &[u8; 8] = b"BRTKMDL\0";
pub const FORMAT_VERSION: u32 = 1;

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.0.write_all(&[v])?)
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v =
            u32::try_from(v).map_err(|_| Error::ModelFormat(format!("{v} does not fit in u32")))?;
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_bits().to_le_bytes())?)
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        Ok(self.0.write_all(s.as_bytes())?)
    }
    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        self.u32(v.len())?;
        v.iter().try_for_each(|&x| self.f64(x))
    }
    fn u32s(&mut self, v: &[u32]) -> Result<()> {
        self.u32(v.len())?;
        v.iter().try_for_each(|&x| self.u32(x as usize))
    }
}

struct In<R: Read>(R);

impl<R: Read> In<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::ModelFormat(format!("truncated model file: {e}")))?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(self.bytes()?)))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        let mut b = vec![0u8; n];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        String::from_utf8(b).map_err(|_| Error::ModelFormat("invalid UTF-8 string".into()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.u32()?;
        (0..n).map(|_| self.u32().map(|v| v as u32)).collect()
    }
}

pub fn write_model<W: Write>(w: W, m: &BoostedModel) -> Result<()> {
    let mut o = Out(w);
    o.0.write_all(MAGIC)?;
    o.u32(FORMAT_VERSION as usize)?;
    o.u32(m.features.len())?;
    for f in &m.features {
        o.str(&f.name)?;
        o.u8(match f.kind {
            CovariateKind::Numeric => 0,
            CovariateKind::Categorical => 1,
        })?;
        o.u32(f.levels.len())?;
        for l in &f.levels {
            o.str(l)?;
        }
    }
    o.f64(m.f0)?;
    o.f64(m.learning_rate)?;
    o.f64(m.bag_fraction)?;
    o.u64(m.seed)?;
    o.u32(m.tree_size)?;
    o.u32(m.min_obs_leaf)?;
    o.u32(m.max_trees)?;
    o.f64s(&m.importance)?;
    o.f64s(&m.train_deviance)?;
    o.f64s(&m.cv_deviance)?;
    o.u32(m.trees.len())?;
    for t in &m.trees {
        o.u32(t.nodes.len())?;
        for n in &t.nodes {
            match n {
                Node::Leaf { value } => {
                    o.u8(0)?;
                    o.f64(*value)?;
                }
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                    missing,
                    improvement,
                } => {
                    o.u8(match rule {
                        SplitRule::Numeric { .. } => 1,
                        SplitRule::Categorical { .. } => 2,
                    })?;
                    o.u32(*feature)?;
                    o.u32(*left)?;
                    o.u32(*right)?;
                    o.u32(*missing)?;
                    o.f64(*improvement)?;
                    match rule {
                        SplitRule::Numeric { threshold } => o.f64(*threshold)?,
                        SplitRule::Categorical { left, right } => {
                            o.u32s(left)?;
                            o.u32s(right)?;
                        }
                    }
                }
            }
        }
    }
    o.0.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<BoostedModel> {
    let mut i = In(r);
    if &i.bytes::<8>()? != MAGIC {
        return Err(Error::ModelFormat("not a model file (bad magic)".into()));
    }
    let version = i.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version}"
        )));
    }
    let nf = i.u32()?;
    let mut features = Vec::with_capacity(nf);
    for _ in 0..nf {
        let name = i.str()?;
        let kind = match i.u8()? {
            0 => CovariateKind::Numeric,
            1 => CovariateKind::Categorical,
            k => return Err(Error::ModelFormat(format!("unknown feature kind {k}"))),
        };
        let nl = i.u32()?;
        let levels = (0..nl).map(|_| i.str()).collect::<Result<_>>()?;
        features.push(FeatureInfo { name, kind, levels });
    }
    let f0 = i.f64()?;
    let learning_rate = i.f64()?;
    let bag_fraction = i.f64()?;
    let seed = i.u64()?;
    let tree_size = i.u32()?;
    let min_obs_leaf = i.u32()?;
    let max_trees = i.u32()?;
    let importance = i.f64s()?;
    let train_deviance = i.f64s()?;
    let cv_deviance = i.f64s()?;
    let nt = i.u32()?;
    let mut trees = Vec::with_capacity(nt);
    for _ in 0..nt {
        let nn = i.u32()?;
        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let tag = i.u8()?;
            nodes.push(match tag {
                0 => Node::Leaf { value: i.f64()? },
                1 | 2 => {
                    let feature = i.u32()?;
                    let left = i.u32()?;
                    let right = i.u32()?;
                    let missing = i.u32()?;
                    let improvement = i.f64()?;
                    let rule = if tag == 1 {
                        SplitRule::Numeric {
                            threshold: i.f64()?,
                        }
                    } else {
                        SplitRule::Categorical {
                            left: i.u32s()?,
                            right: i.u32s()?,
                        }
                    };
                    if feature >= nf {
                        return Err(Error::ModelFormat(format!(
                            "split on unknown feature {feature}"
                        )));
                    }
                    Node::Split {
                        feature,
                        rule,
                        left,
                        right,
                        missing,
                        improvement,
                    }
                }
                t => return Err(Error::ModelFormat(format!("unknown node tag {t}"))),
            });
        }
        let tree = RegressionTree { nodes };
        if !tree.is_well_formed() {
            return Err(Error::ModelFormat("malformed tree".into()));
        }
        trees.push(tree);
    }
    if importance.len() != nf {
        return Err(Error::ModelFormat("importance length mismatch".into()));
    }
    Ok(BoostedModel {
        features,
        f0,
        learning_rate,
        trees,
        importance,
        seed,
        bag_fraction,
        tree_size,
        min_obs_leaf,
        max_trees,
        train_deviance,
        cv_deviance,
    })
}
