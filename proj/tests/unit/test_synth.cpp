#include <doctest.h>

#include <cmath>

#include "dkfair/fairness.hpp"
#include "dkfair/random.hpp"
#include "dkfair/synth.hpp"
#include "support.hpp"

using namespace dkfair;

TEST_CASE("expected label metrics") {
    SynthSpec s;
    const GroupDefinition fav1{"g", 1, 1}, fav0{"g", 1, 0};
    s.delta = 0.0;
    CHECK(expected_label_metrics(s, fav1).spd == 0.0);
    CHECK(expected_label_metrics(s, fav1).di == 1.0);
    s.delta = 0.2;
    CHECK(expected_label_metrics(s, fav1).spd == doctest::Approx(-0.4));
    CHECK(expected_label_metrics(s, fav1).di == doctest::Approx(0.3 / 0.7));
    s.delta = 0.1;
    CHECK(expected_label_metrics(s, fav0).spd == doctest::Approx(0.2));
    CHECK(expected_label_metrics(s, fav0).di == doctest::Approx(1.5));
}

TEST_CASE("generated label metrics converge to the closed form") {
    const GroupDefinition fav1{"g", 1, 1};
    SynthSpec s;
    s.n = 100000;
    s.seed = 2024;
    s.delta = 0.0;
    auto ds = generate_biased(s);
    CHECK(std::abs(statistical_parity_difference(ds.y, ds.protected_column("g"), fav1).value) < 0.02);
    s.delta = 0.2;
    ds = generate_biased(s);
    const auto& g = ds.protected_column("g");
    CHECK(statistical_parity_difference(ds.y, g, fav1).value == doctest::Approx(-0.4).epsilon(0.05));
    CHECK(std::abs(statistical_parity_difference(ds.y, g, fav1).value + 0.4) < 0.02);
    CHECK(std::abs(disparate_impact(ds.y, g, fav1).value - 0.3 / 0.7) < 0.03);
}

TEST_CASE("smallest valid dataset and validation") {
    SynthSpec s;
    s.n = 4;
    const auto ds = generate_biased(s);
    CHECK(ds.size() == 4);
    CHECK_NOTHROW(ds.validate());
    s.n = 3;
    CHECK_THROWS_AS(generate_biased(s), Error);
    s.n = 10;
    s.delta = 0.5;
    CHECK_THROWS_AS(generate_biased(s), Error);
}

TEST_CASE("generation is seed-deterministic") {
    SynthSpec s;
    s.n = 200;
    s.delta = 0.15;
    const auto a = generate_biased(s), b = generate_biased(s);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    s.seed = 43;
    CHECK_FALSE(generate_biased(s).X == a.X);
}

TEST_CASE("county-like records respect units") {
    const auto schema = testing::shipped_schema();
    const auto recs = generate_county_like(schema.county, 300, 9);
    CHECK(recs.size() == 300);
    for (const auto& r : recs) {
        CHECK(r.explanatory.size() == 20);
        CHECK(*r.pct_nh_white >= 0.0);
        CHECK(*r.pct_nh_white <= 100.0);
        CHECK(*r.alcohol_impaired_death_pct <= 100.0);
        for (const auto& [name, v] : r.explanatory)
            if (schema.county.find_field(name)->unit == UnitClass::Percent) CHECK((*v >= 0.0 && *v <= 100.0));
    }
}

TEST_CASE("rng draws") {
    Rng a(1), b(1);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng r(7);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / 20000.0) < 0.03);
    CHECK(std::abs(sq / 20000.0 - 1.0) < 0.05);
    for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
    CHECK(derive_seed(42, "split") != derive_seed(42, "model:forest"));
    CHECK(derive_seed(42, "split") == derive_seed(42, "split"));
    CHECK(derive_seed(42, "split") != derive_seed(43, "split"));
}
