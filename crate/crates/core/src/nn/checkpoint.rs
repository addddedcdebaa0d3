//! Versioned parameter checkpoints.
//!
//! ```text
//! affect-ssl-checkpoint v1
//! tensors <n>
//! <name> <d0>x<d1>x...
//! ...
//! end
//! <little-endian f64 payload, tensors in header order>
//! ```

use std::io::{self, BufRead, Read, Write};

use super::params::ParamStore;
use super::tensor::Tensor;
use super::NnError;

pub const MAGIC: &str = "affect-ssl-checkpoint";
pub const VERSION: u32 = 1;

pub fn write_checkpoint(store: &ParamStore, mut w: impl Write) -> Result<(), NnError> {
    writeln!(w, "{MAGIC} v{VERSION}")?;
    writeln!(w, "tensors {}", store.len())?;
    for id in store.ids() {
        let dims: Vec<String> = store.tensor(id).shape().iter().map(|d| d.to_string()).collect();
        writeln!(w, "{} {}", store.name(id), dims.join("x"))?;
    }
    writeln!(w, "end")?;
    for id in store.ids() {
        for v in store.get(id) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(r: impl Read) -> Result<ParamStore, NnError> {
    let mut r = io::BufReader::new(r);
    let bad = |m: &str| NnError::Checkpoint(m.to_string());
    let mut line = String::new();
    let mut next_line = |r: &mut io::BufReader<_>| -> Result<String, NnError> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(NnError::Checkpoint("truncated header".into()));
        }
        Ok(line.trim_end_matches('\n').to_string())
    };
    let magic = next_line(&mut r)?;
    if magic != format!("{MAGIC} v{VERSION}") {
        return Err(bad(&format!("unsupported header {magic:?}")));
    }
    let count: usize = next_line(&mut r)?
        .strip_prefix("tensors ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad("missing tensor count"))?;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let l = next_line(&mut r)?;
        let (name, dims) = l.rsplit_once(' ').ok_or_else(|| bad("malformed tensor line"))?;
        let shape = dims
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("malformed shape"))?;
        entries.push((name.to_string(), shape));
    }
    if next_line(&mut r)? != "end" {
        return Err(bad("missing end marker"));
    }
    let mut store = ParamStore::new();
    let mut buf = [0u8; 8];
    for (name, shape) in entries {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|_| bad("truncated payload"))?;
            data.push(f64::from_le_bytes(buf));
        }
        store.add(name, Tensor::new(shape, data)?);
    }
    Ok(store)
}

/// Copies values from `src` into `dst` by name; shapes must agree and every
/// parameter of `dst` must be present.
pub fn restore_into(dst: &mut ParamStore, src: &ParamStore) -> Result<(), NnError> {
    for id in dst.ids().collect::<Vec<_>>() {
        let name = dst.name(id).to_string();
        let sid = src.find(&name).ok_or_else(|| NnError::Checkpoint(format!("missing tensor {name}")))?;
        if src.tensor(sid).shape() != dst.tensor(id).shape() {
            return Err(NnError::Checkpoint(format!("shape mismatch for {name}")));
        }
        dst.get_mut(id).copy_from_slice(src.get(sid));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut store = ParamStore::new();
        let mut rng = rng_from(1, &[]);
        store.add_uniform("layer.w", &[3, 4], 1.0, &mut rng);
        store.add("layer.b", Tensor::new(vec![2], vec![f64::MIN_POSITIVE, -0.0]).unwrap());
        let mut bytes = Vec::new();
        write_checkpoint(&store, &mut bytes).unwrap();
        let back = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for id in store.ids() {
            assert_eq!(back.name(id), store.name(id));
            let a: Vec<u64> = store.get(id).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.get(id).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_other_versions_and_truncation() {
        assert!(read_checkpoint(&b"affect-ssl-checkpoint v2\ntensors 0\nend\n"[..]).is_err());
        let mut store = ParamStore::new();
        store.add_const("x", &[4], 1.0);
        let mut bytes = Vec::new();
        write_checkpoint(&store, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_checkpoint(bytes.as_slice()).is_err());
    }
}
