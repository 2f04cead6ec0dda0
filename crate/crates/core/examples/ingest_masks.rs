//! Load a segmentation mask and depth raster, gate by depth and reduce each
//! nozzle zone to canopy fraction and distance.
//!
//! ```text
//! cargo run --example ingest_masks [mask.seg depth.depth]
//! ```
//!
//! Without arguments a small synthetic pair is written to a temp directory
//! first: a tree at 1.2 m in the upper half and another beyond the gate at
//! 2.5 m in the lower half.

use std::path::PathBuf;

use spraysim::perception::{
    frame_features, fuse_depth_gate, load_depth, load_mask, save_depth, save_mask, DepthFrame,
    PerceptionConfig, SegClass, SegmentedFrame,
};

fn synthetic_pair(dir: &std::path::Path) -> spraysim::Result<(PathBuf, PathBuf)> {
    let (w, h) = (64, 48);
    let mut seg = SegmentedFrame::filled(w, h, SegClass::Sky);
    let mut depth = DepthFrame::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            if (x + y) % 3 != 0 {
                seg.set(x, y, if x % 7 == 0 { SegClass::Fruit } else { SegClass::Tree });
                depth.set(x, y, if x < w / 2 { 1.2 } else { 2.5 });
            }
        }
    }
    let (m, d) = (dir.join("frame.seg"), dir.join("frame.depth"));
    save_mask(&m, &seg)?;
    save_depth(&d, &depth)?;
    Ok((m, d))
}

fn main() -> spraysim::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tmp = std::env::temp_dir().join("spraysim-ingest");
    let (mask_path, depth_path) = match args.as_slice() {
        [m, d] => (PathBuf::from(m), PathBuf::from(d)),
        _ => {
            std::fs::create_dir_all(&tmp).expect("temp dir");
            synthetic_pair(&tmp)?
        }
    };

    let seg = load_mask(&mask_path)?;
    let depth = load_depth(&depth_path)?;
    let cfg = PerceptionConfig::default();
    let gated = fuse_depth_gate(&seg, &depth, cfg.max_depth_m)?;
    println!(
        "{}x{} frame: {} tree pixels before the gate, {} after",
        seg.width(),
        seg.height(),
        seg.count(SegClass::Tree),
        gated.count(SegClass::Tree)
    );

    println!("zone  a_p     d_c_m   pixels");
    for z in frame_features(&seg, &depth, 0.5, &cfg)? {
        println!("{:>4}  {:.4}  {:>6.3}  {}", z.zone_index, z.a_p, z.d_c, z.valid_pixel_count);
    }
    Ok(())
}
