//! Compressed block acknowledgement: a starting sequence number and a 64-bit
//! reception bitmap.

use serde::Serialize;
use thiserror::Error;

use crate::frame_model::SeqNo;

pub const BA_WINDOW: u16 = 64;
/// On-air size charged for a BA control frame.
pub const BA_FRAME_BYTES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockAckError {
    #[error("sequence number {seq} outside the 64-frame window starting at {start}")]
    SeqOutOfWindow { seq: SeqNo, start: SeqNo },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockAck {
    pub starting_seq: SeqNo,
    /// Bit `i` set iff `starting_seq + i` (mod 4096) was received.
    pub bitmap: u64,
}

impl BlockAck {
    fn bit_index(&self, seq: SeqNo) -> Result<u16, BlockAckError> {
        let i = seq.offset_from(self.starting_seq);
        if i >= BA_WINDOW {
            return Err(BlockAckError::SeqOutOfWindow { seq, start: self.starting_seq });
        }
        Ok(i)
    }

    pub fn is_received(&self, seq: SeqNo) -> Result<bool, BlockAckError> {
        let i = self.bit_index(seq)?;
        Ok(self.bitmap >> i & 1 == 1)
    }
}

pub fn make_block_ack<I>(received: I, starting_seq: SeqNo) -> Result<BlockAck, BlockAckError>
where
    I: IntoIterator<Item = SeqNo>,
{
    let mut ba = BlockAck { starting_seq, bitmap: 0 };
    for seq in received {
        let i = ba.bit_index(seq)?;
        ba.bitmap |= 1 << i;
    }
    Ok(ba)
}

/// The entries of `sent` whose bitmap bit is clear, in their original order.
pub fn missing_seqs(ba: &BlockAck, sent: &[SeqNo]) -> Result<Vec<SeqNo>, BlockAckError> {
    let mut missing = Vec::new();
    for &seq in sent {
        if !ba.is_received(seq)? {
            missing.push(seq);
        }
    }
    Ok(missing)
}
