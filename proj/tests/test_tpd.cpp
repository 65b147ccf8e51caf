#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "sinkhorn_oracle.hpp"
#include "test_util.hpp"
#include "traco/sinkhorn.hpp"

using namespace traco;
using testutil::random_matrix;
using testutil::sinkhorn_oracle;

TEST_CASE("transport_cost examples") {
    Matrix same(2, 2, std::vector<double>{1.0, 1.0, 2.0, 2.0});
    Matrix c0 = transport_cost(same, same);
    CHECK(c0(0, 0) == 0.0);
    CHECK(c0(1, 1) == 0.0);

    Matrix children(1, 2, std::vector<double>{0.0, 1.0});
    Matrix parents(1, 1, std::vector<double>{0.0});
    Matrix c1 = transport_cost(children, parents);
    CHECK(c1.rows() == 2);
    CHECK(c1.cols() == 1);
    CHECK(c1(0, 0) == 0.0);
    CHECK(c1(1, 0) == 1.0);

    Matrix child(2, 1, std::vector<double>{3.0, 4.0});
    Matrix parent(2, 1, std::vector<double>{0.0, 0.0});
    CHECK(transport_cost(child, parent)(0, 0) == doctest::Approx(25.0));

    CHECK_THROWS_AS(transport_cost(Matrix(2, 1), Matrix(3, 1)), ShapeError);
}

TEST_CASE("sinkhorn on zero cost with uniform marginals") {
    SinkhornConfig cfg;
    SinkhornResult res = sinkhorn(Matrix(2, 2, 0.0), Marginals::uniform(2, 2), cfg);
    for (double p : res.plan.values()) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(res.converged);
}

TEST_CASE("sinkhorn matches the high-precision oracle at small epsilon") {
    Matrix cost(2, 2, std::vector<double>{0.0, 1.0, 1.0, 0.0});
    SinkhornConfig cfg;
    cfg.epsilon = 0.05;
    cfg.stop_tolerance = 1e-12;
    cfg.max_iterations = 100000;
    SinkhornResult res = sinkhorn(cost, Marginals::uniform(2, 2), cfg);
    Matrix expect = sinkhorn_oracle(cost, {0.5, 0.5}, {0.5, 0.5}, 0.05);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::abs(res.plan.values()[i] - expect.values()[i]) < 1e-9);
    }
    CHECK(res.plan(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.plan(0, 1) < 1e-6);
    CHECK(res.plan(1, 0) < 1e-6);
}

TEST_CASE("sinkhorn approaches the independence coupling at large epsilon") {
    // For this cost the exact entropic plan deviates from uniform by
    // 0.25 * (e^(1/eps) - 1) / (e^(1/eps) + 1): 1.25e-3 at eps = 100 and
    // 1.25e-4 at eps = 1000.
    Matrix cost(2, 2, std::vector<double>{0.0, 1.0, 1.0, 0.0});
    for (auto [eps, bound] : {std::pair{100.0, 1.3e-3}, std::pair{1000.0, 1.3e-4}}) {
        SinkhornConfig cfg;
        cfg.epsilon = eps;
        cfg.stop_tolerance = 1e-10;
        cfg.max_iterations = 10000;
        SinkhornResult res = sinkhorn(cost, Marginals::uniform(2, 2), cfg);
        Matrix expect = sinkhorn_oracle(cost, {0.5, 0.5}, {0.5, 0.5}, eps);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(std::abs(res.plan.values()[i] - 0.25) < bound);
            CHECK(std::abs(res.plan.values()[i] - expect.values()[i]) < 1e-9);
        }
    }
}

TEST_CASE("sinkhorn marginal invariants on random costs") {
    Rng rng(31);
    SinkhornConfig cfg;
    cfg.max_iterations = 50000;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = 2 + rng.below(49);
        const std::size_t n = 2 + rng.below(19);
        Matrix cost = random_matrix(rng, m, n, 0.0, 100.0);
        Marginals marg = Marginals::uniform(m, n);
        SinkhornResult res = sinkhorn(cost, marg, cfg);
        CHECK(res.converged);
        PlanCheck pc = check_plan(res.plan, marg);
        CHECK(pc.row_l1 < cfg.stop_tolerance);
        CHECK(pc.col_l1 < cfg.stop_tolerance);
        CHECK(pc.entries_in_unit_range);
    }
}

TEST_CASE("plan entropy is nondecreasing in epsilon") {
    Rng rng(37);
    const double eps_grid[] = {0.01, 0.05, 0.5, 5.0};
    for (int trial = 0; trial < 20; ++trial) {
        Matrix cost = random_matrix(rng, 6, 4, 0.0, 1.0);
        double prev = -1e300;
        for (double eps : eps_grid) {
            SinkhornConfig cfg;
            cfg.epsilon = eps;
            cfg.stop_tolerance = 1e-9;
            cfg.max_iterations = 100000;
            const double h = plan_entropy(sinkhorn(cost, Marginals::uniform(6, 4), cfg).plan);
            CHECK(h >= prev - 1e-9);
            prev = h;
        }
    }
}

TEST_CASE("sinkhorn is invariant to constant cost shifts") {
    Rng rng(41);
    SinkhornConfig cfg;
    cfg.stop_tolerance = 1e-10;
    cfg.max_iterations = 100000;
    Matrix cost = random_matrix(rng, 5, 3, 0.0, 1.0);
    Matrix shifted = cost;
    for (double& x : shifted.values()) x += 7.25;
    Marginals marg = Marginals::uniform(5, 3);
    Matrix a = sinkhorn(cost, marg, cfg).plan;
    Matrix b = sinkhorn(shifted, marg, cfg).plan;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-8);
    }
}

TEST_CASE("sinkhorn error contracts") {
    SinkhornConfig cfg;
    Marginals bad;
    bad.row = Matrix(2, 1, 0.5);
    bad.col = Matrix(2, 1, std::vector<double>{1.0, 0.0});
    CHECK_THROWS_AS(sinkhorn(Matrix(2, 2, 0.0), bad, cfg), std::invalid_argument);

    Matrix inf_cost(2, 2, 0.0);
    inf_cost(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sinkhorn(inf_cost, Marginals::uniform(2, 2), cfg), NumericError);

    CHECK_THROWS_AS(sinkhorn(Matrix(2, 2, 0.0), Marginals::uniform(3, 2), cfg), ShapeError);
}

TEST_CASE("unconverged solves return the current plan with diagnostics") {
    Rng rng(43);
    Matrix cost = random_matrix(rng, 30, 10, 0.0, 100.0);
    SinkhornConfig cfg;
    cfg.max_iterations = 3;
    SinkhornResult res = sinkhorn(cost, Marginals::uniform(30, 10), cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 3);
    CHECK(res.row_error > 0.0);
    CHECK(res.plan.rows() == 30);
}

TEST_CASE("unrolled solve tracks the value-domain solver") {
    Rng rng(47);
    Matrix cost = random_matrix(rng, 6, 4, 0.0, 2.0);
    SinkhornConfig cfg;
    cfg.epsilon = 0.5;
    SinkhornResult value_res = sinkhorn(cost, Marginals::uniform(6, 4), cfg);
    Tape tape;
    Var c = tape.constant(cost);
    SinkhornResult info;
    Var plan = sinkhorn_unrolled(tape, c, Marginals::uniform(6, 4), cfg, -1, &info);
    CHECK(info.iterations == value_res.iterations);
    for (std::size_t i = 0; i < plan.val().size(); ++i) {
        CHECK(std::abs(plan.val().values()[i] - value_res.plan.values()[i]) < 1e-14);
    }
}

TEST_CASE("tpd_loss examples") {
    Matrix zero(2, 2, 0.0);
    Matrix anti(2, 2, std::vector<double>{0.0, 1.0, 1.0, 0.0});
    Matrix diag(2, 2, std::vector<double>{0.5, 0.0, 0.0, 0.5});
    Matrix quarter(2, 2, 0.25);
    CHECK(tpd_loss(zero, quarter) == 0.0);
    CHECK(tpd_loss(anti, diag) == 0.0);
    CHECK(tpd_loss(anti, quarter) == doctest::Approx(0.5));
    CHECK_THROWS_AS(tpd_loss(anti, Matrix(3, 2, 0.0)), ShapeError);
}

TEST_CASE("parent_of examples") {
    Matrix diag(2, 2, std::vector<double>{0.5, 0.0, 0.0, 0.5});
    CHECK(parent_of(diag) == std::vector<std::size_t>{0, 1});

    Matrix uniform(1, 3, std::vector<double>{0.2, 0.2, 0.2});
    CHECK(parent_of(uniform) == std::vector<std::size_t>{0});

    Matrix toy(2, 2, std::vector<double>{0.1, 0.4, 0.3, 0.2});
    CHECK(parent_of(toy) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("unrolled tpd gradient matches finite differences of the full pipeline") {
    // embeddings -> cost -> plan -> loss, 3 children x 2 parents, eps = 0.5
    Rng rng(53);
    Matrix child = random_matrix(rng, 2, 3, -1.0, 1.0);
    Matrix parent = random_matrix(rng, 2, 2, -1.0, 1.0);
    SinkhornConfig cfg;
    cfg.epsilon = 0.5;
    cfg.stop_tolerance = 1e-10;
    cfg.max_iterations = 20000;

    auto build = [&cfg](Tape& tape, std::vector<Var>& v) {
        Var cost = pairwise_sq_dist(v[0], v[1]);
        Var plan = sinkhorn_unrolled(tape, cost, Marginals::uniform(3, 2), cfg);
        return tpd_loss(cost, plan);
    };
    CHECK(testutil::gradcheck({child, parent}, build, 1e-5) < 1e-3);
}

TEST_CASE("detached tpd gradient matches finite differences of its convention") {
    Rng rng(59);
    Matrix child = random_matrix(rng, 2, 3, -1.0, 1.0);
    Matrix parent = random_matrix(rng, 2, 2, -1.0, 1.0);
    SinkhornConfig cfg;
    cfg.epsilon = 0.5;
    const Matrix frozen_plan =
        sinkhorn(transport_cost(child, parent), Marginals::uniform(3, 2), cfg).plan;

    auto build = [&frozen_plan](Tape&, std::vector<Var>& v) {
        Var cost = pairwise_sq_dist(v[0], v[1]);
        return tpd_loss_detached(cost, frozen_plan);
    };
    CHECK(testutil::gradcheck({child, parent}, build) < 1e-4);
}
