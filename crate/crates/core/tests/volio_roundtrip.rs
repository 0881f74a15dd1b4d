use proptest::prelude::*;
use topofuse::volio::{read_volume, write_volume, DType, Endian, Volume, VolumeFormat, WriteOptions};

fn dims() -> impl Strategy<Value = [usize; 3]> {
    (1usize..6, 1usize..6, 1usize..5).prop_map(|(a, b, c)| [a, b, c])
}

fn cast(v: f64, dtype: DType) -> f64 {
    match dtype {
        DType::U8 => (v.abs() as u8) as f64,
        DType::I16 => (v as i16) as f64,
        DType::U16 => (v.abs() as u16) as f64,
        DType::F32 => (v as f32) as f64,
        DType::F64 => v,
    }
}

fn dtype() -> impl Strategy<Value = DType> {
    prop_oneof![
        Just(DType::U8),
        Just(DType::I16),
        Just(DType::U16),
        Just(DType::F32),
        Just(DType::F64)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn representable_values_roundtrip(
        d in dims(),
        dt in dtype(),
        big_endian in any::<bool>(),
        nrrd in any::<bool>(),
        gzip in any::<bool>(),
        seed in prop::collection::vec(-200.0f64..200.0, 120),
        spacing in (0.1f64..3.0, 0.1f64..3.0, 0.1f64..3.0),
    ) {
        let len = d[0] * d[1] * d[2];
        let values: Vec<f64> = (0..len).map(|i| cast(seed[i % seed.len()], dt)).collect();
        let v = Volume::new(d, values)
            .unwrap()
            .with_spacing([spacing.0, spacing.1, spacing.2])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (path, format) = if nrrd {
            (dir.path().join("v.nrrd"), VolumeFormat::Nrrd)
        } else {
            (dir.path().join("v.raw"), VolumeFormat::RawMeta)
        };
        let opts = WriteOptions {
            dtype: dt,
            endian: if big_endian { Endian::Big } else { Endian::Little },
            quantization: None,
            gzip: gzip && nrrd,
        };
        write_volume(&v, &path, format, &opts).unwrap();
        let back = read_volume(&path, format).unwrap();
        prop_assert_eq!(back.dims(), v.dims());
        prop_assert_eq!(back.values(), v.values());
        prop_assert_eq!(back.spacing(), v.spacing());
    }
}
