//! Versioned binary checkpoint for [`ActorCritic`].
//!
//! All integers and reals are little-endian:
//!
//! ```text
//! magic            8 bytes  "CGRLNET\0"
//! version          u32      1
//! has_image        u32      0 or 1
//! channels         u32      image channels (0 without image)
//! height           u32
//! width            u32
//! vector_inputs    u32
//! conv_count       u32      followed by conv_count u32 channel counts
//! hidden_count     u32      followed by hidden_count u32 widths
//! activation       u32      0 tanh, 1 relu, 2 identity
//! action_count     u32
//! param_count      u64
//! params           param_count f64, in layer declaration order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, ActorCritic, ImageShape, NetError, NetSpec};

pub const MAGIC: &[u8; 8] = b"CGRLNET\0";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(net: &ActorCritic, mut out: W) -> Result<(), NetError> {
    let spec = net.spec();
    out.write_all(MAGIC)?;
    let mut header = vec![VERSION];
    match spec.image {
        Some(img) => header.extend([1, img.channels as u32, img.height as u32, img.width as u32]),
        None => header.extend([0, 0, 0, 0]),
    }
    header.push(spec.vector_inputs as u32);
    header.push(spec.conv_channels.len() as u32);
    header.extend(spec.conv_channels.iter().map(|&c| c as u32));
    header.push(spec.hidden.len() as u32);
    header.extend(spec.hidden.iter().map(|&h| h as u32));
    header.push(spec.activation.code());
    header.push(spec.action_count as u32);
    for word in header {
        out.write_all(&word.to_le_bytes())?;
    }
    out.write_all(&(net.parameter_count() as u64).to_le_bytes())?;
    for p in net.params() {
        out.write_all(&p.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<ActorCritic, NetError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(NetError::Checkpoint("not a network checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(NetError::Checkpoint(format!("unsupported version {version}")));
    }
    let has_image = read_u32(&mut input)?;
    let channels = read_u32(&mut input)? as usize;
    let height = read_u32(&mut input)? as usize;
    let width = read_u32(&mut input)? as usize;
    let image = match has_image {
        0 => None,
        1 => Some(ImageShape {
            channels,
            height,
            width,
        }),
        other => return Err(NetError::Checkpoint(format!("bad image flag {other}"))),
    };
    let vector_inputs = read_u32(&mut input)? as usize;
    let conv_channels = read_list(&mut input)?;
    let hidden = read_list(&mut input)?;
    let activation_code = read_u32(&mut input)?;
    let activation = Activation::from_code(activation_code)
        .ok_or_else(|| NetError::Checkpoint(format!("unknown activation {activation_code}")))?;
    let action_count = read_u32(&mut input)? as usize;
    let spec = NetSpec {
        image,
        vector_inputs,
        conv_channels,
        hidden,
        activation,
        action_count,
    };
    let shape = ActorCritic::zeros(spec.clone())?;
    let mut buf8 = [0u8; 8];
    input.read_exact(&mut buf8).map_err(truncated)?;
    let count = u64::from_le_bytes(buf8) as usize;
    if count != shape.parameter_count() {
        return Err(NetError::Checkpoint(format!(
            "spec needs {} parameters but checkpoint stores {count}",
            shape.parameter_count()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut buf8).map_err(truncated)?;
        params.push(f64::from_le_bytes(buf8));
    }
    ActorCritic::from_params(spec, params)
}

pub fn save(net: &ActorCritic, path: &Path) -> Result<(), NetError> {
    write_checkpoint(net, BufWriter::new(File::create(path)?))
}

pub fn load(path: &Path) -> Result<ActorCritic, NetError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

fn truncated(e: std::io::Error) -> NetError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        NetError::Checkpoint("file is truncated".into())
    } else {
        NetError::Io(e)
    }
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, NetError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf).map_err(truncated)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_list<R: Read>(input: &mut R) -> Result<Vec<usize>, NetError> {
    let len = read_u32(input)? as usize;
    if len > 1024 {
        return Err(NetError::Checkpoint(format!("implausible layer count {len}")));
    }
    (0..len).map(|_| read_u32(input).map(|v| v as usize)).collect()
}
