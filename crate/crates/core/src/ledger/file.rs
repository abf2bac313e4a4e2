//! Chain file: 16-byte magic, one format-version byte, then each block as a
//! `u32` little-endian length followed by its canonical encoding.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::ledger::block::Block;

pub const MAGIC: [u8; 16] = *b"GOVCHAIN\0\0\0\0\0\0\0\0";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum ChainFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a chain file: {0}")]
    BadHeader(String),
    #[error("block at height {height} unreadable: {detail}")]
    Block { height: u64, detail: String },
}

pub fn encode_chain(blocks: &[Block]) -> Vec<u8> {
    let mut out = Vec::with_capacity(17 + blocks.len() * 512);
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    for b in blocks {
        let bytes = b.encode();
        out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

/// Result of a best-effort parse: every block read before the first
/// unreadable one, and the error that stopped parsing if any.
#[derive(Debug)]
pub struct ParsedChain {
    pub blocks: Vec<Block>,
    pub error: Option<ChainFileError>,
}

pub fn parse_chain(bytes: &[u8]) -> ParsedChain {
    let mut blocks = Vec::new();
    if bytes.len() < MAGIC.len() + 1 || bytes[..MAGIC.len()] != MAGIC {
        return ParsedChain {
            blocks,
            error: Some(ChainFileError::BadHeader("missing GOVCHAIN magic".into())),
        };
    }
    if bytes[MAGIC.len()] != FORMAT_VERSION {
        return ParsedChain {
            blocks,
            error: Some(ChainFileError::BadHeader(format!(
                "unsupported format version {}",
                bytes[MAGIC.len()]
            ))),
        };
    }
    let mut pos = MAGIC.len() + 1;
    while pos < bytes.len() {
        let height = blocks.len() as u64 + 1;
        let fail = |detail: &str| ChainFileError::Block {
            height,
            detail: detail.to_string(),
        };
        if bytes.len() - pos < 4 {
            return ParsedChain {
                blocks,
                error: Some(fail("truncated length prefix")),
            };
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if bytes.len() - pos < len {
            return ParsedChain {
                blocks,
                error: Some(fail("truncated block")),
            };
        }
        match Block::decode(&bytes[pos..pos + len]) {
            Ok(b) => blocks.push(b),
            Err(e) => {
                return ParsedChain {
                    blocks,
                    error: Some(fail(&e.to_string())),
                }
            }
        }
        pos += len;
    }
    ParsedChain {
        blocks,
        error: None,
    }
}

pub fn decode_chain(bytes: &[u8]) -> Result<Vec<Block>, ChainFileError> {
    let parsed = parse_chain(bytes);
    match parsed.error {
        Some(e) => Err(e),
        None => Ok(parsed.blocks),
    }
}

pub fn write_chain_file(path: &Path, blocks: &[Block]) -> Result<(), ChainFileError> {
    fs::write(path, encode_chain(blocks))?;
    Ok(())
}

pub fn read_chain_file(path: &Path) -> Result<Vec<Block>, ChainFileError> {
    decode_chain(&fs::read(path)?)
}
