#![no_main]

use evoxplain::RasterImage;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = RasterImage::from_png_bytes(data) {
        assert_eq!(img.len(), img.width() as usize * img.height() as usize);
        // re-encoding a decoded image is lossless
        let png = img.to_png_bytes().unwrap();
        assert_eq!(RasterImage::from_png_bytes(&png).unwrap(), img);
    }
});
