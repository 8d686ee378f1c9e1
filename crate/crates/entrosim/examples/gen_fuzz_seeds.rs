//! Regenerates the checked-in fuzz corpus seeds under `fuzz/corpus/`.
//!
//! Run from the workspace root: `cargo run -p entrosim --example gen_fuzz_seeds`

use std::fs;
use std::path::Path;

use entrosim::checkpoint::encode_checkpoint;
use entrosim::corpus::{encode_manifest, CorpusManifest, ManifestRow};
use entrosim::egr::encode_egr;
use entrosim::entropy::{build_entropy_graph, entropy_stream, ExtractConfig, FillPolicy};
use entrosim::nn::{BlockSpec, Model, ModelConfig};

fn write(dir: &Path, name: &str, bytes: &[u8]) {
    fs::create_dir_all(dir).expect("create corpus dir");
    fs::write(dir.join(name), bytes).expect("write seed");
}

fn main() {
    let root = Path::new("fuzz/corpus");

    // egr_parse: two small valid graphs.
    let cfg = ExtractConfig {
        segment_len: 8,
        graph_h: 4,
        graph_w: 4,
        fill_policy: FillPolicy::Resample,
    };
    let bytes: Vec<u8> = (0..256u16).map(|i| (i % 251) as u8).collect();
    let g = build_entropy_graph(&entropy_stream(&bytes, &cfg), &cfg);
    write(&root.join("egr_parse"), "small_resample.egr", &encode_egr(&g));
    let cfg_pad = ExtractConfig {
        fill_policy: FillPolicy::PadTruncate,
        graph_h: 2,
        graph_w: 3,
        ..cfg
    };
    let g2 = build_entropy_graph(&entropy_stream(&bytes[..40], &cfg_pad), &cfg_pad);
    write(&root.join("egr_parse"), "small_pad.egr", &encode_egr(&g2));

    // ntc_parse: a tiny but fully valid checkpoint.
    let mc = ModelConfig {
        input_h: 4,
        input_w: 4,
        blocks: vec![BlockSpec { n_conv: 1, filters: 2 }],
        fc1_units: 3,
        embed_units: 2,
        n_classes: 2,
        family_names: vec!["a".into(), "b".into()],
        segment_len: 8,
        fill_policy: FillPolicy::Resample,
    };
    let model = Model::<f32>::init(mc, 1).expect("valid tiny model");
    write(&root.join("ntc_parse"), "tiny.ntc", &encode_checkpoint(&model, 0.3));

    // manifest_parse: rows plus a skipped section.
    let manifest = CorpusManifest {
        rows: vec![ManifestRow {
            id: "fam/a.bin".into(),
            family: "fam".into(),
            egr_path: "fam/a.bin.egr".into(),
            source_len: 256,
            n_segments: 32,
            warnings: vec![],
        }],
        skipped: vec!["fam/orphan.bin".into()],
    };
    write(
        &root.join("manifest_parse"),
        "manifest.jsonl",
        encode_manifest(&manifest).as_bytes(),
    );

    // labels_parse / config_parse / ratio_spec_parse: textual seeds.
    write(
        &root.join("labels_parse"),
        "labels.csv",
        b"fam/a.bin,fam\n# comment\nother/b.bin,other\n",
    );
    write(
        &root.join("config_parse"),
        "train.conf",
        b"# training config\nepochs = 50\nbatch_size = 24\nlr = 1e-4\nalpha = 0.3\nsplit_ratio = 0.8\n",
    );
    write(&root.join("ratio_spec_parse"), "sweep.txt", b"0.1:0.9:0.1");

    // entropy_extract: config byte + mixed-entropy payload.
    let mut payload = vec![0xC8u8]; // segment_len 9, 4x1 grid via the header byte
    payload.extend(std::iter::repeat_n(0x00, 64));
    payload.extend((0..64).map(|i| (i * 37 % 256) as u8));
    write(&root.join("entropy_extract"), "mixed.bin", &payload);

    println!("fuzz corpus seeds written under {}", root.display());
}
