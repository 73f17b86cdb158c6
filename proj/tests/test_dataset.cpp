#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "wgf/dataset.hpp"
#include "wgf/errors.hpp"

using namespace wgf;

TEST_SUITE("dataset") {

TEST_CASE("sparse rows parse with implicit zeros") {
    const std::string text =
        "# comment line\n"
        "+1 1:0.5 3:-2.0\n"
        "-1 2:1.25\n"
        "\n"
        "+1 1:1 2:2 3:3  # trailing comment\n";
    const LabeledDataset ds = parse_libsvm_text(text);
    CHECK(ds.n() == 3);
    CHECK(ds.n_features() == 4);  // three indices plus the bias
    CHECK(ds.features(0, 0) == 0.5);
    CHECK(ds.features(0, 1) == 0.0);
    CHECK(ds.features(0, 2) == -2.0);
    CHECK(ds.features(1, 0) == 0.0);
    CHECK(ds.features(1, 1) == 1.25);
    CHECK(ds.features(2, 2) == 3.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ds.features(i, 3) == 1.0);
    CHECK(ds.labels == std::vector<int>{1, -1, 1});

    SUBCASE("a bare label row still gets the bias") {
        const LabeledDataset lone = parse_libsvm_text("-1\n");
        CHECK(lone.n_features() == 1);
        CHECK(lone.features(0, 0) == 1.0);
        CHECK(lone.labels == std::vector<int>{-1});
    }
}

TEST_CASE("nonstandard label pairs map the smaller to -1") {
    SUBCASE("one two") {
        const LabeledDataset ds = parse_libsvm_text("1 1:1\n2 1:2\n1 1:3\n");
        CHECK(ds.labels == std::vector<int>{-1, 1, -1});
    }
    SUBCASE("zero one") {
        const LabeledDataset ds = parse_libsvm_text("0 1:1\n1 1:2\n");
        CHECK(ds.labels == std::vector<int>{-1, 1});
    }
    SUBCASE("fractional pair") {
        const LabeledDataset ds = parse_libsvm_text("2.5 1:1\n0.5 1:2\n");
        CHECK(ds.labels == std::vector<int>{1, -1});
    }
    SUBCASE("lone class passes through only when already signed") {
        const LabeledDataset ds = parse_libsvm_text("-1 1:1\n-1 1:2\n");
        CHECK(ds.labels == std::vector<int>{-1, -1});
        CHECK_THROWS_AS(parse_libsvm_text("3 1:1\n3 1:2\n"), NonBinaryLabels);
    }
}

TEST_CASE("malformed input names the line") {
    CHECK_THROWS_AS(parse_libsvm_text("+1 1:not-a-number\n"), MalformedLine);
    CHECK_THROWS_AS(parse_libsvm_text("+1 0:1.0\n"), MalformedLine);   // 1-based
    CHECK_THROWS_AS(parse_libsvm_text("+1 1\n"), MalformedLine);       // no colon
    CHECK_THROWS_AS(parse_libsvm_text("abc 1:1\n"), MalformedLine);
    try {
        parse_libsvm_text("+1 1:1\n+1 2:x\n");
        FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_libsvm_text("1 1:1\n2 1:1\n3 1:1\n"), NonBinaryLabels);
    CHECK_THROWS_AS(parse_libsvm_text(""), MalformedLine);  // no usable rows
}

TEST_CASE("standardizer uses the training rows only") {
    const LabeledDataset ds = parse_libsvm_text(
        "+1 1:2 2:5\n"
        "-1 1:4 2:5\n"
        "+1 1:100 2:100\n");
    const Standardizer st = fit_standardizer(ds, {0, 1});
    CHECK(st.mean[0] == doctest::Approx(3.0));
    CHECK(st.scale[0] == doctest::Approx(1.0));  // population sd of {2,4} is 1
    CHECK(st.mean[1] == doctest::Approx(0.0));   // constant column, untouched
    CHECK(st.scale[1] == doctest::Approx(1.0));

    LabeledDataset copy = ds;
    apply_standardizer(st, copy);
    CHECK(copy.features(0, 0) == doctest::Approx(-1.0));
    CHECK(copy.features(1, 0) == doctest::Approx(1.0));
    CHECK(copy.features(2, 0) == doctest::Approx(97.0));
    CHECK(copy.features(0, 1) == doctest::Approx(5.0));
    CHECK(copy.features(2, 1) == doctest::Approx(100.0));
    // The bias survives standardization unchanged.
    for (std::size_t i = 0; i < 3; ++i) CHECK(copy.features(i, 2) == 1.0);
}

}  // TEST_SUITE
