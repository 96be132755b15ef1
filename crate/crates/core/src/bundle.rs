//! Binary save/load of chains.
//!
//! Layout of a bundle file:
//!
//! ```text
//! b"LPDOBND1"                       8 bytes
//! manifest length L                 u64, little endian
//! manifest                          L bytes of UTF-8 JSON (see `Manifest`)
//! site 0 .. site N-1 payloads       f64 little endian, (re, im) interleaved
//! ```
//!
//! Each site payload lists the entries of `A[s, chi_l, chi_r, kappa]` in
//! row-major order (kappa fastest). Saving and loading is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::{LpdoChain, LOCAL_DIM};
use crate::error::{LpdoError, Result};
use crate::tensor::{DenseTensor, Index, IndexId, IndexRole};

pub const MAGIC: &[u8; 8] = b"LPDOBND1";
pub const FORMAT_VERSION: u32 = 1;
pub const INDEX_ORDER: &str = "physical, bond_left, bond_right, kraus; row-major, kraus fastest";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteDims {
    pub chi_left: usize,
    pub chi_right: usize,
    pub kraus: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub local_dim: usize,
    pub ortho_center: Option<usize>,
    pub index_order: String,
    pub sites: Vec<SiteDims>,
}

impl Manifest {
    pub fn for_chain(chain: &LpdoChain) -> Self {
        Self {
            format: "lpdo-bundle".into(),
            version: FORMAT_VERSION,
            n: chain.n_sites(),
            local_dim: LOCAL_DIM,
            ortho_center: chain.center(),
            index_order: INDEX_ORDER.into(),
            sites: chain
                .sites()
                .iter()
                .map(|t| {
                    let d = t.dims();
                    SiteDims {
                        chi_left: d[1],
                        chi_right: d[2],
                        kraus: d[3],
                    }
                })
                .collect(),
        }
    }
}

pub fn write_bundle<W: Write>(chain: &LpdoChain, mut w: W) -> Result<()> {
    let manifest = serde_json::to_vec(&Manifest::for_chain(chain))?;
    w.write_all(MAGIC)?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    w.write_all(&manifest)?;
    for t in chain.sites() {
        for z in t.data() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_bundle<R: Read>(mut r: R) -> Result<LpdoChain> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LpdoError::Bundle("bad magic bytes".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 30 {
        return Err(LpdoError::Bundle(format!("manifest length {len} is implausible")));
    }
    let mut manifest = vec![0u8; len as usize];
    r.read_exact(&mut manifest)?;
    let manifest: Manifest = serde_json::from_slice(&manifest)?;
    if manifest.version != FORMAT_VERSION {
        return Err(LpdoError::Bundle(format!("unsupported version {}", manifest.version)));
    }
    if manifest.local_dim != LOCAL_DIM {
        return Err(LpdoError::Bundle(format!("unsupported local dimension {}", manifest.local_dim)));
    }
    if manifest.sites.len() != manifest.n {
        return Err(LpdoError::Bundle("site list length differs from n".into()));
    }
    let mut sites = Vec::with_capacity(manifest.n);
    let mut buf = [0u8; 16];
    for (i, d) in manifest.sites.iter().enumerate() {
        let indices = vec![
            Index::new(IndexId::physical(i), LOCAL_DIM, IndexRole::Physical)?,
            Index::new(IndexId::bond(i), d.chi_left, IndexRole::Bond)?,
            Index::new(IndexId::bond(i + 1), d.chi_right, IndexRole::Bond)?,
            Index::new(IndexId::kraus(i), d.kraus, IndexRole::Kraus)?,
        ];
        let count = LOCAL_DIM * d.chi_left * d.chi_right * d.kraus;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
            data.push(C64::new(re, im));
        }
        sites.push(DenseTensor::new(indices, data)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(LpdoError::Bundle("trailing bytes after the last site".into()));
    }
    LpdoChain::from_sites(sites, manifest.ortho_center)
}

pub fn save(chain: &LpdoChain, path: impl AsRef<Path>) -> Result<()> {
    write_bundle(chain, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<LpdoChain> {
    read_bundle(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut chain = LpdoChain::random_pure(6, 4, 12).unwrap();
        chain.depolarize_to_lpmm().unwrap();
        let mut bytes = Vec::new();
        write_bundle(&chain, &mut bytes).unwrap();
        let back = read_bundle(bytes.as_slice()).unwrap();
        assert_eq!(back, chain);
        let mut again = Vec::new();
        write_bundle(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let chain = LpdoChain::optimal_lpmm(2).unwrap();
        let mut bytes = Vec::new();
        write_bundle(&chain, &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_bundle(bad.as_slice()), Err(LpdoError::Bundle(_))));
        assert!(read_bundle(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(read_bundle(long.as_slice()), Err(LpdoError::Bundle(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.lpdo");
        let chain = LpdoChain::random_pure(4, 2, 1).unwrap();
        save(&chain, &path).unwrap();
        assert_eq!(load(&path).unwrap(), chain);
    }
}
