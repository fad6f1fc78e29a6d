#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "nfg/data.hpp"

using namespace nfg;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p, const std::string& content) : path(std::move(p)) {
        write_file(path, content);
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv: basic parsing and risk inference") {
    TempFile file("data_basic.csv",
                  "time,event,age,weight\n"
                  "1.5,0,60,80\n"
                  "2.0,1,55,70\n"
                  "0.5,2,70,90\n");
    const auto data = load_csv(file.path);
    CHECK(data.n == 3);
    CHECK(data.p == 2);
    CHECK(data.n_risks == 2);
    CHECK(data.feature_names == std::vector<std::string>{"age", "weight"});
    CHECK(data.row(1)[0] == 55.0);
    CHECK(data.times[2] == 0.5);
}

TEST_CASE("load_csv error paths") {
    TempFile neg("data_neg.csv", "time,event,x\n-1.0,1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(neg.path),
                         doctest::Contains("line 2"), UsageError);

    TempFile header_only("data_header.csv", "time,event,x\n");
    CHECK_THROWS_AS(load_csv(header_only.path), UsageError);

    TempFile missing("data_missing.csv", "time,event,x\n1.0,1,\n2.0,0,3\n,1,4\n");
    try {
        load_csv(missing.path);
        CHECK(false);
    } catch (const UsageError& e) {
        const std::string what = e.what();
        CHECK(what.find("2") != std::string::npos);
        CHECK(what.find("4") != std::string::npos);
    }

    TempFile badnum("data_badnum.csv", "time,event,x\n1.0,1,abc\n");
    try {
        load_csv(badnum.path);
        CHECK(false);
    } catch (const ParseError& e) {
        const std::string what = e.what();
        CHECK(what.find("line 2") != std::string::npos);
        CHECK(what.find("x") != std::string::npos);
    }

    TempFile badlabel("data_badlabel.csv", "time,event,x\n1.0,-1,2\n");
    CHECK_THROWS_AS(load_csv(badlabel.path), UsageError);

    CHECK_THROWS_AS(load_csv("does_not_exist.csv"), UsageError);
}

TEST_CASE("csv round trip preserves values") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.n = 50;
    spec.seed = 9;
    const auto data = generate_synthetic(spec);
    save_csv(data, "data_roundtrip.csv");
    const auto loaded = load_csv("data_roundtrip.csv");
    CHECK(loaded.n == data.n);
    CHECK(loaded.p == data.p);
    CHECK(loaded.times == data.times);
    CHECK(loaded.events == data.events);
    CHECK(loaded.covariates == data.covariates);
    std::remove("data_roundtrip.csv");
}

TEST_CASE("generator hits the censoring target and risk shares") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.n = 30000;
    spec.seed = 12345;
    const auto data = generate_synthetic(spec);
    CHECK(data.n == 30000);
    CHECK(data.p == 12);
    CHECK(data.n_risks == 2);

    int censored = 0;
    int risk1 = 0;
    int risk2 = 0;
    for (int d : data.events) {
        if (d == 0) ++censored;
        if (d == 1) ++risk1;
        if (d == 2) ++risk2;
    }
    const double n = data.n;
    CHECK(censored / n >= 0.49);
    CHECK(censored / n <= 0.51);
    CHECK(risk1 / n >= 0.22);
    CHECK(risk1 / n <= 0.28);
    CHECK(risk2 / n >= 0.22);
    CHECK(risk2 / n <= 0.28);
}

TEST_CASE("identical gammas give symmetric risk shares") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.gamma2 = spec.gamma1;
    spec.n = 30000;
    spec.seed = 77;
    const auto data = generate_synthetic(spec);
    int risk1 = 0;
    int risk2 = 0;
    for (int d : data.events) {
        if (d == 1) ++risk1;
        if (d == 2) ++risk2;
    }
    CHECK(std::abs(risk1 - risk2) < 0.01 * data.n);
}

TEST_CASE("censoring target near zero produces almost no censoring") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.n = 5000;
    spec.seed = 3;
    spec.censoring_target = 0.02;
    const auto data = generate_synthetic(spec);
    int censored = 0;
    for (int d : data.events) censored += d == 0 ? 1 : 0;
    CHECK(censored <= static_cast<int>(0.03 * data.n));
}

TEST_CASE("analytic CIF closed form") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    const std::vector<double> x(12, 0.0);  // lambda_1 = lambda_2 = 1

    CHECK(analytic_cif(spec, x, 0.0, 1) == 0.0);
    CHECK(analytic_cif(spec, x, std::log(2.0), 1) == doctest::Approx(0.5 * (1.0 - 0.25)).epsilon(1e-12));
    CHECK(analytic_cif(spec, x, 1e9, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(analytic_cif(spec, x, 1e9, 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("analytic CIFs sum to 1 - S(t)") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(12);
        for (auto& v : x) v = rng.normal();
        const double t = rng.uniform(0.0, 5.0);
        const auto [l1, l2] = analytic_hazards(spec, x);
        const double total = analytic_cif(spec, x, t, 1) + analytic_cif(spec, x, t, 2);
        CHECK(total == doctest::Approx(1.0 - std::exp(-(l1 + l2) * t)).epsilon(1e-12));
    }
}

TEST_CASE("generator consistency: empirical CIF matches the closed form") {
    // Aalen-Johansen counting at (almost) fixed hazards: select draws whose
    // quadratic statistics fall in a small ball, then compare against the
    // analytic CIF at the ball center.
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.seed = 2029;
    Rng rng(42);

    // ball center: a covariate draw defining the target hazards
    std::vector<double> x0(12);
    for (auto& v : x0) v = rng.normal();
    const auto [t1, t2] = analytic_hazards(spec, x0);

    // rejection-sample cohort members whose hazards are close to the center
    std::vector<double> obs_times;
    std::vector<int> obs_risks;
    const int wanted = 100000;
    std::vector<double> x(12);
    while (static_cast<int>(obs_times.size()) < wanted) {
        for (auto& v : x) v = rng.normal();
        const auto [l1, l2] = analytic_hazards(spec, x);
        if (std::abs(l1 - t1) > 0.05 * t1 || std::abs(l2 - t2) > 0.05 * t2) continue;
        const auto [t, r] = sample_latent(spec, x, rng);
        obs_times.push_back(t);
        obs_risks.push_back(r);
    }

    // empirical CIF (no censoring in the latent draws): plain counting
    const double horizon = 0.5 / (t1 + t2);
    for (int risk = 1; risk <= 2; ++risk) {
        int count = 0;
        for (std::size_t i = 0; i < obs_times.size(); ++i)
            if (obs_risks[i] == risk && obs_times[i] <= horizon) ++count;
        const double empirical = static_cast<double>(count) / static_cast<double>(wanted);
        const double analytic = analytic_cif(spec, x0, horizon, risk);
        CHECK(std::abs(empirical - analytic) <= 0.02);
    }
}

TEST_CASE("fold assignment: sizes, strata, determinism, row-order invariance") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.n = 1003;
    spec.seed = 21;
    const auto data = generate_synthetic(spec);

    const int k = 5;
    const auto folds = split_folds(data, k, 99);

    std::vector<int> sizes(k, 0);
    std::map<std::pair<int, int>, int> per_stratum;  // (fold, label) -> count
    for (int i = 0; i < data.n; ++i) {
        ++sizes[static_cast<std::size_t>(folds[static_cast<std::size_t>(i)])];
        ++per_stratum[{folds[static_cast<std::size_t>(i)], data.events[static_cast<std::size_t>(i)]}];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*hi - *lo <= 1);

    // stratification: per-fold label counts within +-2 of the proportional share
    std::map<int, int> label_totals;
    for (int d : data.events) ++label_totals[d];
    for (const auto& [key, count] : per_stratum) {
        const double share = static_cast<double>(label_totals[key.second]) / k;
        CHECK(std::abs(count - share) <= 2.0);
    }

    // determinism
    CHECK(split_folds(data, k, 99) == folds);
    CHECK(split_folds(data, k, 100) != folds);

    // row-order invariance: shuffle rows, mapping must follow the rows
    std::vector<int> perm(static_cast<std::size_t>(data.n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng(4);
    shuffle_rng.shuffle(perm);
    const auto shuffled = data.subset(perm);
    const auto shuffled_folds = split_folds(shuffled, k, 99);
    for (int i = 0; i < data.n; ++i)
        CHECK(shuffled_folds[static_cast<std::size_t>(i)] ==
              folds[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
}

TEST_CASE("standardization on training rows") {
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.n = 500;
    spec.seed = 8;
    auto data = generate_synthetic(spec);
    // add a constant feature
    for (int i = data.n - 1; i >= 0; --i)
        data.covariates.insert(data.covariates.begin() + (i + 1) * data.p, 3.25);
    ++data.p;
    data.feature_names.push_back("constant");

    std::vector<int> rows(static_cast<std::size_t>(data.n));
    std::iota(rows.begin(), rows.end(), 0);
    const auto st = standardize(data, rows);

    CHECK(st.constant_features == std::vector<int>{data.p - 1});
    CHECK(st.stddev.back() == 1.0);

    for (int j = 0; j < data.p - 1; ++j) {
        double mean = 0.0;
        for (int i = 0; i < data.n; ++i)
            mean += (data.row(i)[static_cast<std::size_t>(j)] - st.mean[static_cast<std::size_t>(j)]) /
                    st.stddev[static_cast<std::size_t>(j)];
        mean /= data.n;
        double var = 0.0;
        for (int i = 0; i < data.n; ++i) {
            const double z = (data.row(i)[static_cast<std::size_t>(j)] - st.mean[static_cast<std::size_t>(j)]) /
                             st.stddev[static_cast<std::size_t>(j)];
            var += (z - mean) * (z - mean);
        }
        var /= data.n;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-10);
    }
}

TEST_CASE("generate rejects invalid specs") {
    SyntheticSpec bad = SyntheticSpec::defaults();
    bad.censoring_target = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad), UsageError);
    SyntheticSpec badgamma = SyntheticSpec::defaults();
    badgamma.gamma1.pop_back();
    CHECK_THROWS_AS(generate_synthetic(badgamma), UsageError);
}
