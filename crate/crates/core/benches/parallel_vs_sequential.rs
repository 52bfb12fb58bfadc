use std::fmt::Write as _;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use worldgrid_core::broker::{match_parallel, match_sequential, MatchRequest};
use worldgrid_core::grid::Grid;
use worldgrid_core::ids::{RbId, UserDn, VoName};
use worldgrid_core::infosys::SchemaFlavor;
use worldgrid_core::jdl::parse_expr;
use worldgrid_core::parallel::{map_par, map_seq};
use worldgrid_core::topology::TopologyConfig;
use worldgrid_core::SimTime;

const DN: &str = "/CN=bench";

fn synthetic(ces: usize) -> Grid {
    let mut t = format!("[vo bench]\n{DN}\n\n[host rb]\nregion = EU\n\n[broker rb_bench]\nflavor = EDG\nhost = rb\n\n[catalog rc]\nhost = rb\n\n[wan EU EU]\nbandwidth = 5\nlatency = 0.03\n\n");
    for i in 0..ces {
        write!(
            t,
            "[site s{i}]\nregion = EU\nvos = bench\n\n\
             [ce ce{i:05}]\nsite = s{i}\nlrms = PBS\nflavors = EDG\nwn_count = {}\ncpu_mhz = {}\n\
             tags = CMS, TAG{}\nclose_ses = se{i:05}\n\n\
             [se se{i:05}]\nsite = s{i}\ncapacity = 100 GB\n\n",
            4 + i % 13,
            800 + (i % 7) * 200,
            i % 5
        )
        .unwrap();
    }
    Grid::new(&TopologyConfig::parse(&t).unwrap(), 1).unwrap()
}

fn matchmaking(c: &mut Criterion) {
    let req_expr = parse_expr(r#"Member("CMS", other.RunTimeEnvironment) && other.LRMSType == "PBS""#).unwrap();
    let mut group = c.benchmark_group("matchmaking");
    for n in [64, 512, 4096] {
        let mut g = synthetic(n);
        let p = g.create_proxy(&UserDn::new(DN), &VoName::new("bench"), None).unwrap();
        for i in 0..n / 2 {
            let jdl = format!(
                "Executable = \"cmkin.sh\"; VirtualOrganisation = \"bench\"; Requirements = true; Events = {}; JobIndex = {i};",
                10 + i % 90
            );
            g.submit(&RbId::new("rb_bench"), &jdl, &p).unwrap();
        }
        g.run_until(SimTime::from_secs(1));
        let vo = VoName::new("bench");
        let req = MatchRequest {
            flavor: SchemaFlavor::Edg,
            vo: &vo,
            proxy: &p,
            requirements: &req_expr,
            rank: None,
            inputs: &[],
            now: g.now(),
        };
        assert_eq!(
            match_sequential(g.index(), g.vo(), &req),
            match_parallel(g.index(), g.vo(), &req)
        );
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| match_sequential(black_box(g.index()), g.vo(), &req))
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| match_parallel(black_box(g.index()), g.vo(), &req))
        });
    }
    group.finish();
}

fn one_run(seed: u64) -> usize {
    let mut g = Grid::worldgrid(seed);
    let dn = UserDn::new("/C=IT/O=INFN/OU=Personal Certificate/L=Pisa/CN=Flavia Donno");
    let p = g.create_proxy(&dn, &VoName::new("datatag"), None).unwrap();
    for i in 0..50 {
        let jdl = format!(
            "Executable = \"cmkin.sh\"; VirtualOrganisation = \"datatag\"; \
             Requirements = Member(\"CMS\", other.RunTimeEnvironment); Events = 250; JobIndex = {i};"
        );
        g.submit(&RbId::new("rb_pisa"), &jdl, &p).unwrap();
    }
    g.run();
    g.trace().len()
}

fn seed_sweep(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..16).collect();
    assert_eq!(map_seq(&seeds, |s| one_run(*s)), map_par(&seeds, |s| one_run(*s)));
    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| map_seq(black_box(&seeds), |s| one_run(*s))));
    group.bench_function("parallel", |b| b.iter(|| map_par(black_box(&seeds), |s| one_run(*s))));
    group.finish();
}

criterion_group!(benches, matchmaking, seed_sweep);
criterion_main!(benches);
