use crate::error::{Error, Result};
use crate::model::{LayerConfig, Layout, Mode, PackedTensor, TensorKind};

/// Direct convolution over unblocked tensors: input `NCHW [ic, ih, iw]`,
/// weights `CKRS [ic, oc, fh, fw]`, output `KHW [oc, oh, ow]`. Padding
/// contributes nothing. In binary mode elements are bits with 0 meaning +1.
pub fn scalar_oracle(
    layer: &LayerConfig,
    input: &PackedTensor,
    weights: &PackedTensor,
    mode: Mode,
) -> Result<PackedTensor> {
    layer.validate()?;
    let l = layer;
    if input.layout != Layout::Nchw || input.dims != [l.ic, l.ih, l.iw] {
        return Err(Error::ShapeMismatch(format!(
            "oracle input must be NCHW {:?}, got {} {:?}",
            [l.ic, l.ih, l.iw],
            input.layout,
            input.dims
        )));
    }
    if weights.layout != Layout::Ckrs || weights.dims != [l.ic, l.oc, l.fh, l.fw] {
        return Err(Error::ShapeMismatch(format!(
            "oracle weights must be CKRS {:?}, got {} {:?}",
            [l.ic, l.oc, l.fh, l.fw],
            weights.layout,
            weights.dims
        )));
    }
    let value = |v: i64| match mode {
        Mode::Int8 => v,
        Mode::Binary => 1 - 2 * (v & 1),
    };
    let (oh, ow) = (l.oh(), l.ow());
    let mut out = vec![0i64; l.oc * oh * ow];
    for k in 0..l.oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0i64;
                for c in 0..l.ic {
                    for r in 0..l.fh {
                        for sc in 0..l.fw {
                            let (Some(h), Some(w)) =
                                ((oy * l.s + r).checked_sub(l.pad), (ox * l.s + sc).checked_sub(l.pad))
                            else {
                                continue;
                            };
                            if h >= l.ih || w >= l.iw {
                                continue;
                            }
                            let a = value(input.data[(c * l.ih + h) * l.iw + w]);
                            let b = value(weights.data[((c * l.oc + k) * l.fh + r) * l.fw + sc]);
                            acc += a * b;
                        }
                    }
                }
                out[(k * oh + oy) * ow + ox] = acc;
            }
        }
    }
    PackedTensor::new(TensorKind::Output, Layout::KhwScalar, vec![l.oc, oh, ow], out)
}

/// First `(k, h, w)` where two `KHW` outputs differ, with both values.
pub fn first_mismatch(a: &PackedTensor, b: &PackedTensor) -> Option<((usize, usize, usize), i64, i64)> {
    let (h, w) = (a.dims[1], a.dims[2]);
    if a.dims != b.dims {
        return Some(((0, 0, 0), a.data.len() as i64, b.data.len() as i64));
    }
    a.data
        .iter()
        .zip(&b.data)
        .position(|(p, q)| p != q)
        .map(|i| ((i / (h * w), i / w % h, i % w), a.data[i], b.data[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(kind: TensorKind, layout: Layout, dims: Vec<usize>, data: Vec<i64>) -> PackedTensor {
        PackedTensor::new(kind, layout, dims, data).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let l = LayerConfig::new(4, 4, 2, 3, 3, 3, 1, 1).unwrap();
        let i = t(TensorKind::Input, Layout::Nchw, vec![2, 4, 4], (0..32).collect());
        let w = t(TensorKind::Weight, Layout::Ckrs, vec![2, 3, 3, 3], vec![0; 54]);
        assert!(scalar_oracle(&l, &i, &w, Mode::Int8)
            .unwrap()
            .data
            .iter()
            .all(|&v| v == 0));
    }

    #[test]
    fn identity_filter_copies_input() {
        let l = LayerConfig::new(3, 5, 1, 1, 1, 1, 1, 0).unwrap();
        let i = t(
            TensorKind::Input,
            Layout::Nchw,
            vec![1, 3, 5],
            (0..15).map(|v| v - 7).collect(),
        );
        let w = t(TensorKind::Weight, Layout::Ckrs, vec![1, 1, 1, 1], vec![1]);
        assert_eq!(scalar_oracle(&l, &i, &w, Mode::Int8).unwrap().data, i.data);
    }

    #[test]
    fn binary_agreement_is_maximal() {
        let l = LayerConfig::new(4, 4, 3, 2, 2, 2, 1, 0).unwrap();
        let i = t(TensorKind::Input, Layout::Nchw, vec![3, 4, 4], vec![1; 48]);
        let w = t(TensorKind::Weight, Layout::Ckrs, vec![3, 2, 2, 2], vec![1; 24]);
        let out = scalar_oracle(&l, &i, &w, Mode::Binary).unwrap();
        assert!(out.data.iter().all(|&v| v == 3 * 2 * 2));
    }

    #[test]
    fn mismatch_coordinates() {
        let a = t(TensorKind::Output, Layout::KhwScalar, vec![2, 2, 3], vec![0; 12]);
        let mut b = a.clone();
        b.data[10] = 5;
        assert_eq!(first_mismatch(&a, &b), Some(((1, 1, 1), 0, 5)));
        assert_eq!(first_mismatch(&a, &a), None);
    }
}
