#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ncmart/error.hpp"
#include "ncmart/hlmax.hpp"
#include "ncmart/random.hpp"

using namespace ncmart;

namespace {

OpStepFunction random_psd_fn(const FiltrationPtr& f, int d, Rng& rng) {
    std::vector<HermitianMatrix> v;
    for (int c = 0; c < f->cell_count(); ++c) v.push_back(random_psd(rng, d));
    return OpStepFunction(f, std::move(v));
}

}  // namespace

TEST_CASE("grid family construction") {
    CHECK_THROWS_AS(adjacent_grids(3.0, 4), ParameterError);
    CHECK_THROWS_AS(adjacent_grids(1.0, 0), ParameterError);
    const auto g = adjacent_grids(1.0, 4);
    CHECK(g.grid_count() == 3);
    CHECK(g.C_contain <= 8.0);
    MESSAGE("C_contain = " << g.C_contain);
    for (const auto& grid : g.grids) CHECK(grid->breakpoints() == g.cells()->breakpoints());
}

TEST_CASE("containment examples") {
    const auto g = adjacent_grids(1.0, 3);
    // one finest lattice cell: its own atom
    const double delta = 1.0 / 24.0;
    const auto c = find_container(g, 0.5 * delta, 0.5 * delta);
    REQUIRE(c.grid >= 0);
    CHECK(c.ratio == doctest::Approx(1.0));
    // a tiny ball straddling 0 needs a lattice step below r/3
    const auto deep = adjacent_grids(1.0, 10);
    const auto s = find_container(deep, 0.0, 1e-3);
    REQUIRE(s.grid >= 0);
    CHECK(s.ratio <= 8.0);
    const auto big = find_container(g, 0.0, 0.5);
    REQUIRE(big.grid >= 0);
    CHECK(big.ratio <= 4.0);
}

TEST_CASE("property: containment ratio on the ball mesh") {
    for (int J : {2, 3, 5}) {
        const auto g = adjacent_grids(2.0, J);
        for (const auto& b : containment_mesh(g)) {
            const auto c = find_container(g, b.x, b.r);
            REQUIRE(c.grid >= 0);
            CHECK(c.ratio <= g.C_contain * (1.0 + 1e-12));
            // the atom really contains the ball
            const auto& f = *g.grids[c.grid];
            const auto& cells = f.atom_cells(c.level, c.atom);
            CHECK(f.cell_left(cells.front()) <= b.x - b.r + 1e-12);
            CHECK(f.cell_right(cells.back()) >= b.x + b.r - 1e-12);
        }
    }
}

TEST_CASE("ball averages") {
    const auto g = adjacent_grids(2.0, 3);
    Rng rng(127);
    const auto c = random_psd(rng, 2);
    const auto avg = ball_average(OpStepFunction::constant(g.cells(), c), 0.25);
    for (int i = 0; i < avg.size(); ++i) {
        const double x = g.cells()->cell_mid(i);
        if (x - 0.25 < -2.0 || x + 0.25 > 2.0) continue;
        CHECK(frobenius_distance(avg[i], c) < 1e-12);
    }
    // indicator of [0,1) times I, r = 1 at x = 0: half the ball overlaps
    std::vector<HermitianMatrix> v;
    for (int i = 0; i < g.cells()->cell_count(); ++i) {
        const double x = g.cells()->cell_mid(i);
        v.push_back(HermitianMatrix::scalar(x >= 0.0 && x < 1.0 ? 1.0 : 0.0, 2));
    }
    const auto h = ball_average_at(OpStepFunction(g.cells(), v), 0.0, 1.0);
    CHECK(frobenius_distance(h, HermitianMatrix::scalar(0.5, 2)) < 1e-12);
}

TEST_CASE("property: averages are contractions and are dominated by grid averages") {
    const auto g = adjacent_grids(1.0, 4);
    const auto mesh = containment_mesh(g);
    Rng rng(131);
    for (int t = 0; t < 10; ++t) {
        const auto f = random_psd_fn(g.cells(), 2, rng);
        double top = 0.0;
        for (int c = 0; c < f.size(); ++c) top = std::max(top, operator_norm(f[c]));
        for (double r : {0.02, 0.1, 0.3}) {
            const auto a = ball_average(f, r);
            for (int c = 0; c < a.size(); ++c) CHECK(operator_norm(a[c]) <= top * (1.0 + 1e-12));
        }
        CHECK(domination_defect(g, f, mesh) <= 1e-8);
    }
}

TEST_CASE("weak type: constant f below lambda / C_contain gives no excess") {
    const auto g = adjacent_grids(1.0, 3);
    const auto f = OpStepFunction::constant(g.cells(), HermitianMatrix::scalar(0.5, 2));
    // the projections are taken at level lambda / C_contain
    const auto rep = hl_maximal_report(g, f, 2.0, Weight::constant(g.cells()), {0.1, 0.2}, 0.51 * g.C_contain);
    CHECK(rep.excess == doctest::Approx(0.0));
    CHECK(rep.weak_ok);
}

TEST_CASE("property: weak and strong type over random weights") {
    const auto g = adjacent_grids(1.0, 4);
    Rng rng(137);
    double worst_strong = 0.0;
    for (int t = 0; t < 30; ++t) {
        const auto w = random_loguniform_weight(g.cells(), 0.7, rng);
        std::vector<double> v(g.cells()->cell_count());
        for (auto& x : v) x = std::exp(rng.normal());
        const auto f = OpStepFunction::from_scalar(StepFunction(g.cells(), v));
        const double p = t % 3 == 0 ? 1.0 : 2.0;
        const auto rep = hl_maximal_report(g, f, p, w, {0.03, 0.06, 0.125, 0.25}, rng.uniform(0.5, 3.0));
        CHECK(rep.union_ok);
        CHECK(rep.weak_ok);
        CHECK(rep.level_defect <= 1e-8 * std::max(1.0, rep.lambda));
        if (p > 1.0) {
            CHECK(std::isfinite(rep.strong_upper));
            CHECK(rep.strong_lower <= rep.strong_upper * (1.0 + 1e-9));
            worst_strong = std::max(worst_strong, rep.strong_upper / rep.characteristic);
        }
    }
    MESSAGE("recorded strong-type constant at p = 2: " << worst_strong);
}
