use hiercpi::encoder::{gaussian_spe, snap_distance, EncoderConfig, SpeParams};
use hiercpi::molio::{parse_pdb, parse_sdf, write_pdb, write_sdf, Atom, AtomGraph, Bond, BondOrder};
use hiercpi::motif::{decompose_compound, decompose_protein, find_ring_bonds};
use hiercpi::synth::{write_dataset, SynthOptions};
use hiercpi::training::{finetune_forward, load_complex, read_manifest, Branch, Model, PreparedComplex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NAPHTHALENE: &str = "\
naphthalene
  hand

 10 11  0  0  0  0  0  0  0  0999 V2000
    0.0000    1.4000    0.0000 C   0  0
    1.2124    0.7000    0.0000 C   0  0
    1.2124   -0.7000    0.0000 C   0  0
    0.0000   -1.4000    0.0000 C   0  0
   -1.2124   -0.7000    0.0000 C   0  0
   -1.2124    0.7000    0.0000 C   0  0
    2.4249    1.4000    0.0000 C   0  0
    3.6373    0.7000    0.0000 C   0  0
    3.6373   -0.7000    0.0000 C   0  0
    2.4249   -1.4000    0.0000 C   0  0
  1  2  4  0
  2  3  4  0
  3  4  4  0
  4  5  4  0
  5  6  4  0
  6  1  4  0
  2  7  4  0
  7  8  4  0
  8  9  4  0
  9 10  4  0
 10  3  4  0
M  END
$$$$
";

#[test]
fn naphthalene_from_sdf_is_one_ring_motif() {
    let g = parse_sdf(NAPHTHALENE).unwrap();
    assert_eq!(find_ring_bonds(&g).len(), 11);
    let mg = decompose_compound(&g);
    assert_eq!(mg.motifs, vec![(0..10).collect::<Vec<_>>()]);
    assert!(mg.motif_edges.is_empty());
    let c = mg.centroids[0];
    assert!((c[0] - 1.2124).abs() < 1e-4 && c[1].abs() < 1e-12);
}

#[test]
fn molecules_survive_a_text_round_trip() {
    let g = parse_sdf(NAPHTHALENE).unwrap();
    assert_eq!(parse_sdf(&write_sdf(&g, "x")).unwrap(), g);
    let atoms = ["N", "CA", "C", "O", "CB"]
        .iter()
        .map(|n| Atom {
            name: Some(n.to_string()),
            residue_name: Some("ALA".into()),
            residue_id: Some(7),
            chain_id: Some("B".into()),
            ..Atom::new(&n[..1])
        })
        .collect();
    let coords = vec![[0.0, 0.0, 0.0], [1.46, 0.0, 0.0], [2.0, 1.4, 0.0], [1.3, 2.4, 0.0], [2.0, -0.8, 1.2]];
    let pdb = write_pdb(&AtomGraph { atoms, bonds: vec![], coords });
    let p = parse_pdb(&pdb).unwrap();
    assert_eq!(p.bonds.len(), 4);
    let mg = decompose_protein(&p);
    assert_eq!(mg.motifs, vec![vec![0, 1, 2, 3], vec![4]]);
    assert_eq!(mg.motif_edges, vec![[0, 1]]);
}

#[test]
fn single_pair_encoding_matches_the_kernel_formula() {
    let params = SpeParams::initial(4, 0.0, 12.0, 1);
    let d = 3.7;
    let s = gaussian_spe(snap_distance(d), 0, &params).unwrap();
    let spacing = 12.0 / 3.0;
    assert_eq!(s.len(), 4);
    for (k, got) in s.iter().enumerate() {
        let mu = spacing * k as f64;
        let z = (snap_distance(d) - mu) / spacing;
        let want = (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * spacing);
        assert!((got - want).abs() < 1e-15, "kernel {k}");
    }
}

#[test]
fn dataset_on_disk_feeds_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let opts = SynthOptions { compound_atoms: (5, 8), protein_atoms: (20, 24) };
    write_dataset(dir.path(), 3, 4, &opts).unwrap();
    let entries = read_manifest(&dir.path().join("manifest.jsonl")).unwrap();
    assert_eq!(entries.len(), 3);
    let cfg = EncoderConfig {
        layers: 1,
        heads: 2,
        d_model: 8,
        kernels: 4,
        ffn_dim: 16,
        head_hidden: 8,
        ..Default::default()
    };
    let model = Model::new(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    for e in &entries {
        let pc = PreparedComplex::new(load_complex(dir.path(), e).unwrap());
        assert_eq!(finetune_forward(&model, &pc).unwrap().value, 0.0);
        let d = model.predict_cross(&pc, Branch::Atom, &pc.compound().coords).unwrap();
        assert_eq!((d.rows(), d.cols()), (pc.n_compound_atoms(), pc.n_protein_atoms()));
        assert!(d.data().iter().all(|v| v.is_finite() && *v > 0.0));
    }
}

#[test]
fn bonds_must_reference_atoms() {
    let atoms = vec![Atom::new("C"), Atom::new("C")];
    assert!(AtomGraph::new(atoms, vec![Bond::new(0, 2, BondOrder::Single)], vec![[0.0; 3], [1.5, 0.0, 0.0]]).is_err());
}
