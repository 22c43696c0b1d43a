//! Network file format:
//! `{"layers": [{"act": "relu"|"recu"|"linear", "A": [[..], ..], "b": [..]}]}`.
//!
//! Numbers are written with 17 significant digits so reading a file back
//! reproduces every weight bit for bit. Layers whose dense form would be
//! large and mostly zero are written as `{"act", "shape": [rows, cols],
//! "A_sparse": [[i, j, v], ..], "b"}`; the reader accepts both forms.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::net::{Activation, Layer, NeuralNet};
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

const DENSE_LIMIT: usize = 4096;

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to string");
}

fn act_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Recu => "recu",
        Activation::Linear => "linear",
    }
}

pub fn to_json_string(net: &NeuralNet) -> String {
    let mut s = String::from("{\"layers\": [");
    for (k, l) in net.layers().iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        write!(s, "\n  {{\"act\": \"{}\", ", act_name(l.act)).unwrap();
        let (rows, cols) = (l.weights.rows(), l.weights.cols());
        let dense = rows * cols <= DENSE_LIMIT || 2 * l.weights.nnz() >= rows * cols;
        if dense && rows > 0 {
            s.push_str("\"A\": [");
            let a = l.weights.to_dense();
            for r in 0..rows {
                if r > 0 {
                    s.push_str(", ");
                }
                s.push('[');
                for c in 0..cols {
                    if c > 0 {
                        s.push_str(", ");
                    }
                    num(&mut s, a[r * cols + c]);
                }
                s.push(']');
            }
            s.push_str("], ");
        } else {
            write!(s, "\"shape\": [{rows}, {cols}], \"A_sparse\": [").unwrap();
            for (k, (r, c, v)) in l.weights.triplets().into_iter().enumerate() {
                if k > 0 {
                    s.push_str(", ");
                }
                write!(s, "[{r}, {c}, ").unwrap();
                num(&mut s, v);
                s.push(']');
            }
            s.push_str("], ");
        }
        s.push_str("\"b\": [");
        for (k, v) in l.bias.iter().enumerate() {
            if k > 0 {
                s.push_str(", ");
            }
            num(&mut s, *v);
        }
        s.push_str("]}");
    }
    s.push_str("\n]}\n");
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNet {
    layers: Vec<FileLayer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLayer {
    act: Activation,
    #[serde(rename = "A")]
    dense: Option<Vec<Vec<f64>>>,
    shape: Option<(usize, usize)>,
    #[serde(rename = "A_sparse")]
    sparse: Option<Vec<(usize, usize, f64)>>,
    b: Vec<f64>,
}

pub fn from_json_str(text: &str) -> Result<NeuralNet> {
    let file: FileNet = serde_json::from_str(text)?;
    let mut layers = Vec::with_capacity(file.layers.len());
    for (k, l) in file.layers.into_iter().enumerate() {
        let weights = match (l.dense, l.sparse, l.shape) {
            (Some(rows), None, _) => {
                let cols = rows.first().map_or(0, |r| r.len());
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Format(format!("layer {k}: ragged weight matrix")));
                }
                let flat: Vec<f64> = rows.concat();
                SparseMatrix::from_dense(rows.len(), cols, &flat)
            }
            (None, Some(entries), Some((rows, cols))) => {
                if entries.iter().any(|e| e.0 >= rows || e.1 >= cols) {
                    return Err(Error::Format(format!("layer {k}: sparse entry out of bounds")));
                }
                SparseMatrix::from_triplets(rows, cols, &entries)
            }
            _ => return Err(Error::Format(format!("layer {k}: need either `A` or `shape` with `A_sparse`"))),
        };
        if weights.rows() != l.b.len() {
            return Err(Error::Format(format!("layer {k}: bias length does not match weight rows")));
        }
        layers.push(Layer::new(weights, l.b, l.act));
    }
    NeuralNet::new(layers).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(net: &NeuralNet, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<NeuralNet> {
    from_json_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcalc::{prod_net, sq_net};

    #[test]
    fn round_trip_is_bit_exact() {
        let net = prod_net(3.7, 1e-4).unwrap();
        let back = from_json_str(&to_json_string(&net)).unwrap();
        assert_eq!(net, back);
        for x in [0.1234567, -2.5, 3.333] {
            let a = net.realize(&[x, 0.77]).unwrap();
            let b = back.realize(&[x, 0.77]).unwrap();
            assert_eq!(a[0].to_bits(), b[0].to_bits());
        }
    }

    #[test]
    fn reads_hand_written_dense_file() {
        let text = r#"{"layers": [{"act": "relu", "A": [[1.0], [-1.0]], "b": [0, 0]},
                                  {"act": "linear", "A": [[1, -1]], "b": [0.5]}]}"#;
        let net = from_json_str(text).unwrap();
        assert_eq!(net.realize(&[-2.0]).unwrap(), vec![-1.5]);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(from_json_str(r#"{"layers": []}"#).is_err());
        assert!(from_json_str(r#"{"layers": [{"act": "relu", "A": [[1.0]], "b": [0]}]}"#).is_err());
        assert!(from_json_str(r#"{"layers": [{"act": "linear", "A": [[1.0]], "b": [0, 1]}]}"#).is_err());
        assert!(sq_net(2).is_ok());
    }
}
