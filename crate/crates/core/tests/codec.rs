use proptest::prelude::*;
use rosann_core::codec::{
    decode, decode_audio, decode_audio_with, decode_image, parse_schema, CodecError, DecodedValue, FieldType,
    Primitive,
};
use rosann_core::{Connection, TimeStamp};
use rosann_testkit::codec_cases::{case, encoded, expected_msg};
use rosann_testkit::ros::{self, OValue};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn oracle_encoded_values_decode_identically(c in case()) {
        let schema = parse_schema(&c.definition, &c.root.name).unwrap();
        let OValue::Msg(vals) = &c.value else { unreachable!() };
        let want = expected_msg(&c.root, vals, &c.registry);
        prop_assert_eq!(decode(&schema, &encoded(&c)).unwrap(), want);
    }

    #[test]
    fn truncation_and_extension_are_structured_errors(c in case(), cut in any::<prop::sample::Index>()) {
        let schema = parse_schema(&c.definition, &c.root.name).unwrap();
        let bytes = encoded(&c);
        if !bytes.is_empty() {
            let short = &bytes[..cut.index(bytes.len())];
            let is_truncated = matches!(
                decode(&schema, short),
                Err(CodecError::Truncated { .. } | CodecError::LengthOverflow { .. })
            );
            prop_assert!(is_truncated);
        }
        let mut long = bytes.clone();
        long.push(0);
        prop_assert_eq!(decode(&schema, &long), Err(CodecError::TrailingBytes(1)));
    }

    #[test]
    fn arbitrary_bytes_never_panic(c in case(), junk in proptest::collection::vec(any::<u8>(), 0..256)) {
        let schema = parse_schema(&c.definition, &c.root.name).unwrap();
        let _ = decode(&schema, &junk);
    }

    #[test]
    fn mutated_payloads_never_panic(c in case(), flips in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8)) {
        let schema = parse_schema(&c.definition, &c.root.name).unwrap();
        let mut bytes = encoded(&c);
        if !bytes.is_empty() {
            for (i, b) in flips {
                let at = i.index(bytes.len());
                bytes[at] = b;
            }
        }
        let _ = decode(&schema, &bytes);
    }

    #[test]
    fn arbitrary_definition_text_never_panics(text in "[a-z0-9_/\\[\\]=# \n]{0,200}") {
        let _ = parse_schema(&text, "pkg/Fuzz");
    }
}

#[test]
fn image_definition_layout() {
    let s = parse_schema(ros::IMAGE_DEFINITION, "sensor_msgs/Image").unwrap();
    let names: Vec<&str> = s.fields.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["header", "height", "width", "encoding", "is_bigendian", "step", "data"]);
    assert_eq!(s.fields[0].field_type, FieldType::Nested("std_msgs/Header".into()));
    assert_eq!(
        s.fields[6].field_type,
        FieldType::VarArray(Box::new(FieldType::Primitive(Primitive::UInt8)))
    );
}

#[test]
fn unresolved_nested_type() {
    assert_eq!(parse_schema("Foo bar", "pkg/X"), Err(CodecError::UnknownNestedType("Foo".into())));
}

#[test]
fn two_by_two_rgb_image() {
    let conn = Connection::new(1, "/image_raw", "sensor_msgs/Image", ros::IMAGE_DEFINITION);
    let data: Vec<u8> = (0..12).collect();
    let payload = ros::encode_image(4, (10, 20), 2, 2, "rgb8", false, 6, &data);
    let f = decode_image(&conn, &payload, TimeStamp::new(99, 0)).unwrap();
    assert_eq!((f.height, f.width, f.step), (2, 2, 6));
    assert_eq!(f.encoding, "rgb8");
    assert_eq!(f.stamp, TimeStamp::new(10, 20));
    assert_eq!(f.pixel_data, data);

    // the generic path agrees with the fast path
    let schema = parse_schema(ros::IMAGE_DEFINITION, "sensor_msgs/Image").unwrap();
    let v = decode(&schema, &payload).unwrap();
    assert_eq!(v.get("data").and_then(DecodedValue::as_bytes), Some(&data[..]));
}

#[test]
fn image_size_mismatch() {
    let conn = Connection::new(1, "/image_raw", "sensor_msgs/Image", ros::IMAGE_DEFINITION);
    let payload = ros::encode_image(0, (1, 0), 2, 2, "rgb8", false, 6, &[0; 11]);
    assert_eq!(
        decode_image(&conn, &payload, TimeStamp::default()),
        Err(CodecError::SizeMismatch { expected: 12, actual: 11 })
    );
}

#[test]
fn compressed_jpeg_passes_through() {
    let jpeg = rosann_testkit::fixtures::jpeg(8, 8, 3);
    let conn = Connection::new(1, "/image_raw", "sensor_msgs/CompressedImage", ros::COMPRESSED_IMAGE_DEFINITION);
    let payload = ros::encode_compressed_image(0, (5, 0), "rgb8; jpeg compressed bgr8", &jpeg);
    let f = decode_image(&conn, &payload, TimeStamp::default()).unwrap();
    assert_eq!(f.encoding, "jpeg");
    assert_eq!(f.pixel_data, jpeg);
}

#[test]
fn image_on_wrong_type() {
    let conn = Connection::new(1, "/x", "std_msgs/String", "string data");
    assert!(matches!(
        decode_image(&conn, &ros::encode_audio(&[1]), TimeStamp::default()),
        Err(CodecError::TypeMismatch { .. })
    ));
}

#[test]
fn audio_bytes_verbatim() {
    let conn = Connection::new(2, "/audio", "audio_common_msgs/AudioData", ros::AUDIO_DATA_DEFINITION);
    let chunk = decode_audio(&conn, &ros::encode_audio(&[9, 8, 7, 6]), TimeStamp::new(1, 2), "mp3").unwrap();
    assert_eq!(chunk.data, vec![9, 8, 7, 6]);
    assert_eq!(chunk.format_hint, "mp3");
    assert_eq!(chunk.stamp, TimeStamp::new(1, 2));
}

#[test]
fn empty_audio() {
    let conn = Connection::new(2, "/audio", "audio_common_msgs/AudioData", ros::AUDIO_DATA_DEFINITION);
    assert_eq!(
        decode_audio(&conn, &ros::encode_audio(&[]), TimeStamp::default(), "mp3"),
        Err(CodecError::EmptyAudio)
    );
}

#[test]
fn audio_type_aliases() {
    let conn = Connection::new(2, "/mic", "my_msgs/Pcm", "uint8[] data\nuint32 rate");
    let mut payload = ros::encode_audio(&[1, 2]);
    payload.extend_from_slice(&16000u32.to_le_bytes());
    assert!(matches!(
        decode_audio(&conn, &payload, TimeStamp::default(), "pcm"),
        Err(CodecError::TypeMismatch { .. })
    ));
    let chunk = decode_audio_with(&conn, &payload, TimeStamp::default(), "pcm", &["my_msgs/Pcm"]).unwrap();
    assert_eq!(chunk.data, vec![1, 2]);
}
