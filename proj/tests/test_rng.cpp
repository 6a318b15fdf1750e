#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "igaa/rng.hpp"

using igaa::Rng;
using igaa::derive_seed;

TEST_CASE("same seed reproduces the exact draw stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 500; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(42), d(42);
    for (int i = 0; i < 500; ++i) {
        const double u1 = c.uniform01(), u2 = d.uniform01();
        CHECK(u1 == u2);
        CHECK(c.normal() == d.normal());
    }
}

TEST_CASE("different seeds decorrelate immediately") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next_u64() == b.next_u64()) ++same;
    }
    CHECK(same == 0);
}

TEST_CASE("uniform01 stays inside [0, 1) and fills the range") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0, mean = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        mean += u;
    }
    mean /= n;
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
    CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("uniform(lo, hi) honors its bounds") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("index(n) covers [0, n) and never escapes it") {
    Rng rng(11);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const std::size_t k = rng.index(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (const int c : counts) CHECK(c > 700);  // roughly uniform (expected 1000)
}

TEST_CASE("normal draws match standard moments at sampling accuracy") {
    Rng rng(13);
    const int n = 50000;
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        m1 += x;
        m2 += x * x;
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::fabs(m1) < 0.02);
    CHECK(m2 == doctest::Approx(1.0).epsilon(0.03));
    // Shifted/scaled variant.
    Rng rng2(13);
    Rng rng3(13);
    for (int i = 0; i < 100; ++i) {
        CHECK(rng2.normal(2.0, 3.0) == doctest::Approx(2.0 + 3.0 * rng3.normal()).epsilon(1e-15));
    }
}

TEST_CASE("shuffle produces a permutation and is seed-deterministic") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> w = v;
    Rng a(21);
    a.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == w);  // same multiset
    CHECK(v != w);       // overwhelmingly likely for 50 elements

    std::vector<int> v2(50);
    for (int i = 0; i < 50; ++i) v2[i] = i;
    Rng b(21);
    b.shuffle(v2);
    CHECK(v == v2);

    // Single-element and empty vectors are untouched and consume no draws.
    std::vector<int> one{5};
    Rng c(3), d(3);
    c.shuffle(one);
    CHECK(one == std::vector<int>{5});
    CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("derive_seed separates streams and stays stable") {
    const std::uint64_t base = 1234567;
    const std::uint64_t s1 = derive_seed(base, "loop-alpha");
    const std::uint64_t s2 = derive_seed(base, "loop-beta");
    const std::uint64_t s3 = derive_seed(base + 1, "loop-alpha");
    CHECK(s1 != s2);
    CHECK(s1 != s3);
    CHECK(derive_seed(base, "loop-alpha") == s1);  // pure function

    // Streams derived from distinct names do not collide over a broad scan.
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        seen.insert(derive_seed(base, "stream-" + std::to_string(i)));
    }
    CHECK(seen.size() == 2000);
}

TEST_CASE("derived streams are statistically independent of the base stream") {
    const std::uint64_t base = 99;
    Rng direct(base);
    Rng derived(derive_seed(base, "sub"));
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        if (direct.next_u64() == derived.next_u64()) ++same;
    }
    CHECK(same == 0);
}
