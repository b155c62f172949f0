//! Key material on disk: `pk.bin`, `party_<i>.bin`, `sk_c1.bin` (ledger)
//! and `sk_c2.bin` (evaluator), each in the binary codec format.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fedchain_core::secure_agg::codec::{self, CodecError};
use fedchain_core::secure_agg::{CryptoParams, KeyMaterial};

#[derive(Debug, thiserror::Error)]
pub enum KeyFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Codec { path: PathBuf, source: CodecError },
}

pub const PUBLIC_KEY: &str = "pk.bin";
pub const LEDGER_SECRET: &str = "sk_c1.bin";
pub const EVALUATOR_SECRET: &str = "sk_c2.bin";

pub fn party_file(i: usize) -> String {
    format!("party_{i}.bin")
}

fn write(path: PathBuf, bytes: Vec<u8>) -> Result<PathBuf, KeyFileError> {
    fs::write(&path, bytes).map_err(|source| KeyFileError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn read(path: PathBuf) -> Result<(PathBuf, Vec<u8>), KeyFileError> {
    match fs::read(&path) {
        Ok(bytes) => Ok((path, bytes)),
        Err(source) => Err(KeyFileError::Io { path, source }),
    }
}

/// Write every key file into `dir`, returning the paths written.
pub fn write_keys(
    dir: &Path,
    keys: &KeyMaterial,
    params: &CryptoParams,
) -> Result<Vec<PathBuf>, KeyFileError> {
    fs::create_dir_all(dir).map_err(|source| KeyFileError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = vec![write(
        dir.join(PUBLIC_KEY),
        codec::encode_public_key(&keys.public, params),
    )?];
    for p in &keys.parties {
        paths.push(write(
            dir.join(party_file(p.index)),
            codec::encode_party_secret(p, params),
        )?);
    }
    paths.push(write(
        dir.join(LEDGER_SECRET),
        codec::encode_ledger_secret(&keys.ledger, params),
    )?);
    paths.push(write(
        dir.join(EVALUATOR_SECRET),
        codec::encode_evaluator_secret(&keys.evaluator, params),
    )?);
    Ok(paths)
}

/// Load the files written by [`write_keys`] for `parties` parties.
pub fn read_keys(
    dir: &Path,
    params: &CryptoParams,
    parties: usize,
) -> Result<KeyMaterial, KeyFileError> {
    fn decode<T>(
        (path, bytes): (PathBuf, Vec<u8>),
        f: impl FnOnce(&[u8]) -> Result<T, CodecError>,
    ) -> Result<T, KeyFileError> {
        f(&bytes).map_err(|source| KeyFileError::Codec { path, source })
    }
    let public = decode(read(dir.join(PUBLIC_KEY))?, |b| {
        codec::decode_public_key(b, params)
    })?;
    let parties = (0..parties)
        .map(|i| {
            decode(read(dir.join(party_file(i)))?, |b| {
                codec::decode_party_secret(b, params)
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ledger = decode(read(dir.join(LEDGER_SECRET))?, |b| {
        codec::decode_ledger_secret(b, params)
    })?;
    let evaluator = decode(read(dir.join(EVALUATOR_SECRET))?, |b| {
        codec::decode_evaluator_secret(b, params)
    })?;
    Ok(KeyMaterial {
        public,
        parties,
        ledger,
        evaluator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedchain_core::secure_agg::{setup, CryptoContext, ParamRequest};
    use fedchain_core::seed;

    #[test]
    fn write_read_verify() {
        let params = CryptoParams::derive(&ParamRequest {
            degree: 16,
            ..ParamRequest::default()
        })
        .unwrap();
        let ctx = CryptoContext::new(params).unwrap();
        let keys = setup(3, &ctx, &mut seed::stream(1, "keys", 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_keys(dir.path(), &keys, &params).unwrap();
        assert_eq!(paths.len(), 6);
        let back = read_keys(dir.path(), &params, 3).unwrap();
        assert_eq!(back, keys);
        back.verify(&ctx).unwrap();
        fs::write(dir.path().join(LEDGER_SECRET), b"garbage").unwrap();
        assert!(matches!(
            read_keys(dir.path(), &params, 3),
            Err(KeyFileError::Codec { .. })
        ));
    }
}
