#![no_main]

use libfuzzer_sys::fuzz_target;
use nfsar_core::formats::{decode_nfsar1, encode_nfsar1};

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = decode_nfsar1(data) {
        assert_eq!(encode_nfsar1(&image), data);
    }
});
