#include "qcreg/distortion.hpp"
#include "qcreg/intensity.hpp"
#include "qcreg/numerics.hpp"
#include "qcreg/pipeline.hpp"
#include "qcreg/qc.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace qcreg;

namespace {

mesh::ParamMesh grid(int n) {
    mesh::TriMesh m;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) m.vertices.emplace_back(double(i) / n, double(j) / n, 0.0);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = j * (n + 1) + i;
            m.faces.push_back({a, a + 1, a + n + 2});
            m.faces.push_back({a, a + n + 2, a + n + 1});
        }
    }
    return mesh::param_from_planar(std::move(m));
}

qc::PlanarMap wobble(const mesh::ParamMesh& p, double amp) {
    qc::PlanarMap f;
    for (const auto& q : p.uv) {
        f.target_uv.push_back(q + amp * Vec2(std::sin(3 * q.y()) * q.x() * (1 - q.x()),
                                             std::sin(2 * q.x()) * q.y() * (1 - q.y())));
    }
    return f;
}

}  // namespace

static void BM_Svd2x2(benchmark::State& state) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> d(-2, 2);
    std::vector<Mat2> ms(1024);
    for (auto& m : ms) m << d(rng), d(rng), d(rng), d(rng);
    for (auto _ : state) {
        for (const auto& m : ms) benchmark::DoNotOptimize(numerics::svd2x2(m));
    }
    state.SetItemsProcessed(state.iterations() * ms.size());
}
BENCHMARK(BM_Svd2x2);

static void BM_ProjectBounds(benchmark::State& state) {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> d(-3, 3);
    std::vector<Mat2> ms(1024);
    for (auto& m : ms) m << d(rng), d(rng), d(rng), d(rng);
    const distortion::DistortionBounds b{2.0, 0.5};
    for (auto _ : state) {
        for (const auto& m : ms) benchmark::DoNotOptimize(distortion::project_bounds(m, b));
    }
    state.SetItemsProcessed(state.iterations() * ms.size());
}
BENCHMARK(BM_ProjectBounds);

static void BM_Lbs(benchmark::State& state) {
    const auto p = grid(static_cast<int>(state.range(0)));
    const auto f = wobble(p, 0.3);
    const auto mu = qc::beltrami_of_map(p, f);
    std::vector<qc::DirichletPoint> d;
    for (int v : p.boundary) d.push_back({v, f.target_uv[v]});
    for (auto _ : state) benchmark::DoNotOptimize(qc::lbs(p, mu, d));
}
BENCHMARK(BM_Lbs)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_ProjectMap(benchmark::State& state) {
    const auto p = grid(static_cast<int>(state.range(0)));
    const auto f = wobble(p, 1.5);
    const int anchor = p.boundary.front();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            distortion::project_map(p, f, {1.4, 0.6}, {}, 1, qc::DirichletPoint{anchor, f.target_uv[anchor]}));
    }
}
BENCHMARK(BM_ProjectMap)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_Rasterize(benchmark::State& state) {
    const auto p = grid(71);
    std::vector<double> values;
    for (const auto& q : p.uv) values.push_back(q.x() * q.y());
    const int r = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(intensity::rasterize(p, p.uv, values, {r, r}));
}
BENCHMARK(BM_Rasterize)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_DemonsAndSmooth(benchmark::State& state) {
    const auto p = grid(71);
    std::vector<double> a, b;
    for (const auto& q : p.uv) {
        a.push_back(std::sin(6 * q.x()) * q.y());
        b.push_back(std::sin(6 * q.x() + 0.2) * q.y());
    }
    const intensity::Resolution res{512, 512};
    const auto ga = intensity::rasterize(p, p.uv, a, res);
    const auto gb = intensity::rasterize(p, p.uv, b, res);
    const auto overlap = intensity::overlap_mask(ga, gb);
    for (auto _ : state) {
        const auto field = intensity::demons_step(ga, gb, overlap, 1.0);
        benchmark::DoNotOptimize(intensity::gaussian_smooth(field, 2.0));
    }
}
BENCHMARK(BM_DemonsAndSmooth)->Unit(benchmark::kMillisecond);

static void BM_FreeBoundaryDeform(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto p = grid(n);
    mesh::LandmarkSet l;
    const int c = (n / 2) * (n + 1) + n / 2;
    l.pairs.push_back({c, p.uv[c] + Vec2(0.05, 0.02)});
    pipeline::RegistrationConfig cfg;
    cfg.n_outer = 5;
    for (auto _ : state) benchmark::DoNotOptimize(pipeline::free_boundary_deform(p, l, cfg));
}
BENCHMARK(BM_FreeBoundaryDeform)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
