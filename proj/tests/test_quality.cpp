#include <cmath>
#include <numbers>
#include <sstream>

#include <doctest.h>

#include "pmuev/common.hpp"
#include "pmuev/quality.hpp"

using namespace pmuev;

namespace {

PmuRecord record(std::int64_t ts_us, const std::string& id, double vmag = 1.0, double vang = 0.0,
                 double imag = 1.0, double iang = 0.0, double freq = 60.0,
                 std::uint16_t status = 0) {
    PmuRecord r;
    r.ts_us = ts_us;
    r.pmu_id = id;
    r.vmag_pu = vmag;
    r.vang_deg = vang;
    r.imag_ka = imag;
    r.iang_deg = iang;
    r.freq_hz = freq;
    r.status = status;
    return r;
}

// clean aligned streams at the given rate
std::vector<std::vector<PmuRecord>> clean_streams(int t_len, int n_pmus = 2, double rate = 30.0) {
    const auto period = static_cast<std::int64_t>(std::llround(1e6 / rate));
    std::vector<std::vector<PmuRecord>> streams(n_pmus);
    for (int p = 0; p < n_pmus; ++p)
        for (int t = 0; t < t_len; ++t)
            streams[p].push_back(record(t * period, "p" + std::to_string(p)));
    return streams;
}

std::vector<std::string> stream_ids(int n_pmus) {
    std::vector<std::string> ids;
    for (int p = 0; p < n_pmus; ++p) ids.push_back("p" + std::to_string(p));
    return ids;
}

}  // namespace

TEST_CASE("decode_status maps the last two bits") {
    CHECK(decode_status(0x0000) == StatusCode::Good);
    CHECK(decode_status(0xFFFC) == StatusCode::Good);
    CHECK(decode_status(0x0001) == StatusCode::NoData);
    CHECK(decode_status(0xAB01) == StatusCode::NoData);
    CHECK(decode_status(0x0002) == StatusCode::TestMode);
    CHECK(decode_status(0x0003) == StatusCode::PmuError);
    CHECK(decode_status(0xFFFF) == StatusCode::PmuError);
}

TEST_CASE("threshold_filter flags strictly-outside values only") {
    CHECK(threshold_filter(record(0, "p", 1.0, 0, 1, 0, 58.5)) ==
          std::vector<RecordField>{RecordField::Freq});
    CHECK(threshold_filter(record(0, "p", 1.5)).empty());
    // 1.6 p.u. voltage with a healthy frequency flags only the voltage
    CHECK(threshold_filter(record(0, "p", 1.6, 0, 1, 0, 60.0)) ==
          std::vector<RecordField>{RecordField::Vmag});

    SUBCASE("boundary values pass on every field") {
        CHECK(threshold_filter(record(0, "p", 0.0)).empty());
        CHECK(threshold_filter(record(0, "p", 1.0, -180.0, 1.0, 180.0, 59.0)).empty());
        CHECK(threshold_filter(record(0, "p", 1.0, 180.0, 0.0, -180.0, 61.0)).empty());
        CHECK(threshold_filter(record(0, "p", 1.0, 0.0, 10.0)).empty());
    }
    SUBCASE("just outside each boundary is flagged") {
        CHECK(threshold_filter(record(0, "p", -1e-9)) == std::vector<RecordField>{RecordField::Vmag});
        CHECK(threshold_filter(record(0, "p", 1.0, 180.001)) ==
              std::vector<RecordField>{RecordField::Vang});
        CHECK(threshold_filter(record(0, "p", 1.0, 0.0, 10.001)) ==
              std::vector<RecordField>{RecordField::Imag});
        CHECK(threshold_filter(record(0, "p", 1.0, 0.0, 1.0, -180.001)) ==
              std::vector<RecordField>{RecordField::Iang});
        CHECK(threshold_filter(record(0, "p", 1.0, 0.0, 1.0, 0.0, 61.001)) ==
              std::vector<RecordField>{RecordField::Freq});
    }
    SUBCASE("multiple violations report every field") {
        const auto flagged = threshold_filter(record(0, "p", 2.0, 0.0, 11.0, 0.0, 58.0));
        CHECK(flagged == std::vector<RecordField>{RecordField::Vmag, RecordField::Imag, RecordField::Freq});
    }
}

TEST_CASE("phasor_to_pqvf computes P and Q from the phasor pair") {
    auto streams = clean_streams(1);

    SUBCASE("zero angle difference gives P=1, Q=0") {
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        CHECK(result.tensor.at(0, 0, 0) == doctest::Approx(1.0));
        CHECK(result.tensor.at(0, 0, 1) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(result.tensor.at(0, 0, 2) == doctest::Approx(1.0));
        CHECK(result.tensor.at(0, 0, 3) == doctest::Approx(60.0));
        CHECK(result.mask.masked_count() == 0);
    }
    SUBCASE("quadrature gives P=0, Q=1") {
        streams[0][0].vang_deg = 90.0;
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        CHECK(result.tensor.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-7));
        CHECK(result.tensor.at(0, 0, 1) == doctest::Approx(1.0));
    }
    SUBCASE("vmag=1.02, imag=0.5, 30 degrees") {
        streams[0][0].vmag_pu = 1.02;
        streams[0][0].imag_ka = 0.5;
        streams[0][0].vang_deg = 30.0;
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        const double expected_p = 1.02 * 0.5 * std::cos(30.0 * std::numbers::pi / 180.0);
        const double expected_q = 1.02 * 0.5 * std::sin(30.0 * std::numbers::pi / 180.0);
        CHECK(result.tensor.at(0, 0, 0) == doctest::Approx(expected_p).epsilon(1e-6));
        CHECK(result.tensor.at(0, 0, 1) == doctest::Approx(expected_q).epsilon(1e-6));
        CHECK(result.tensor.at(0, 0, 0) == doctest::Approx(0.4417).epsilon(1e-3));
        CHECK(result.tensor.at(0, 0, 1) == doctest::Approx(0.2550).epsilon(1e-3));
    }
}

TEST_CASE("phasor_to_pqvf masks flagged and non-Good readings") {
    auto streams = clean_streams(3);

    SUBCASE("non-Good status masks the whole reading") {
        streams[0][1].status = 0x0001;
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        for (int c = 0; c < kNumChannels; ++c) CHECK(result.mask.at(1, 0, c));
        CHECK(result.mask.masked_count() == 4);
    }
    SUBCASE("flagged voltage masks P, Q, and Vmag") {
        streams[0][1].vmag_pu = 9.0;
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        CHECK(result.mask.at(1, 0, 0));
        CHECK(result.mask.at(1, 0, 1));
        CHECK(result.mask.at(1, 0, 2));
        CHECK_FALSE(result.mask.at(1, 0, 3));
    }
    SUBCASE("flagged current masks P and Q only") {
        streams[0][1].imag_ka = 11.0;
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        CHECK(result.mask.at(1, 0, 0));
        CHECK(result.mask.at(1, 0, 1));
        CHECK_FALSE(result.mask.at(1, 0, 2));
        CHECK_FALSE(result.mask.at(1, 0, 3));
    }
    SUBCASE("flagged frequency masks Freq only") {
        streams[0][1].freq_hz = 58.0;
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        CHECK_FALSE(result.mask.at(1, 0, 0));
        CHECK(result.mask.at(1, 0, 3));
    }
    SUBCASE("a missing slot in the grid is masked, not an error") {
        streams[1].erase(streams[1].begin() + 1);
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        for (int c = 0; c < kNumChannels; ++c) CHECK(result.mask.at(1, 1, c));
    }
}

TEST_CASE("phasor_to_pqvf enforces grid alignment") {
    auto streams = clean_streams(3);
    SUBCASE("off-grid timestamp") {
        streams[0][1].ts_us += 15000;  // 0.45 of a 33.3 ms period
        CHECK_THROWS_AS(phasor_to_pqvf(streams, 30.0, {"p0", "p1"}), AlignmentError);
    }
    SUBCASE("duplicate timestamp") {
        streams[0][1].ts_us = streams[0][0].ts_us;
        CHECK_THROWS_AS(phasor_to_pqvf(streams, 30.0, {"p0", "p1"}), AlignmentError);
    }
    SUBCASE("small jitter within a quarter period is snapped") {
        streams[0][1].ts_us += 2000;  // 6% of the period
        const auto result = phasor_to_pqvf(streams, 30.0, {"p0", "p1"});
        CHECK(result.tensor.t_len == 3);
        CHECK(result.mask.masked_count() == 0);
    }
}

TEST_CASE("mark_na applies the one-second rule") {
    auto make_mask = [](int t_len, int gap_start, int gap_len) {
        auto mask = QualityMask::clear(t_len, 2);
        for (int t = gap_start; t < gap_start + gap_len; ++t) mask.set_all_channels(t, 0, true);
        return mask;
    };

    SUBCASE("31 consecutive missing at 30 Hz marks the PMU NA") {
        const auto out = mark_na(make_mask(40, 3, 31), 30.0);
        CHECK(out.na_pmus == std::set<int>{0});
        for (int t = 0; t < 40; ++t)
            for (int c = 0; c < kNumChannels; ++c) CHECK(out.at(t, 0, c));
    }
    SUBCASE("30 consecutive missing is not NA") {
        const auto out = mark_na(make_mask(40, 3, 30), 30.0);
        CHECK(out.na_pmus.empty());
    }
    SUBCASE("two separate 20-sample gaps are not NA") {
        auto mask = QualityMask::clear(60, 2);
        for (int t = 0; t < 20; ++t) mask.set_all_channels(t, 0, true);
        for (int t = 25; t < 45; ++t) mask.set_all_channels(t, 0, true);
        const auto out = mark_na(mask, 30.0);
        CHECK(out.na_pmus.empty());
    }
    SUBCASE("a run touching the window end counts") {
        const auto out = mark_na(make_mask(40, 9, 31), 30.0);
        CHECK(out.na_pmus == std::set<int>{0});
    }
}

TEST_CASE("complete_low_rank leaves a full matrix untouched") {
    Rng rng(11);
    Eigen::MatrixXd m(8, 5);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 5; ++j) m(i, j) = rng.normal();
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(8, 5, false);
    const auto result = complete_low_rank(m, missing);
    CHECK(result.converged);
    CHECK((result.completed - m).norm() == 0.0);
}

TEST_CASE("complete_low_rank recovers an exact rank-2 matrix") {
    Rng rng(42);
    Eigen::MatrixXd a(60, 2), b(2, 20);
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 2; ++j) a(i, j) = rng.normal();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 20; ++j) b(i, j) = rng.normal();
    const Eigen::MatrixXd truth = a * b;

    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing(60, 20);
    missing.setConstant(false);
    int masked = 0;
    while (masked < 120) {  // 10% of 1200
        const int i = static_cast<int>(rng.uniform_int(0, 59));
        const int j = static_cast<int>(rng.uniform_int(0, 19));
        if (!missing(i, j)) {
            missing(i, j) = true;
            ++masked;
        }
    }
    Eigen::MatrixXd observed = truth;
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 20; ++j)
            if (missing(i, j)) observed(i, j) = 0.0;

    ImputeOptions options;
    options.rank = 2;
    const auto result = complete_low_rank(observed, missing, options);

    double err = 0.0, ref = 0.0;
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 20; ++j)
            if (missing(i, j)) {
                err += (result.completed(i, j) - truth(i, j)) * (result.completed(i, j) - truth(i, j));
                ref += truth(i, j) * truth(i, j);
            }
    CHECK(std::sqrt(err / ref) <= 1e-2);
    CHECK(result.iterations <= 50);

    SUBCASE("observed entries are bit-identical") {
        for (int i = 0; i < 60; ++i)
            for (int j = 0; j < 20; ++j)
                if (!missing(i, j)) CHECK(result.completed(i, j) == truth(i, j));
    }
}

TEST_CASE("complete_low_rank masked-entry error is monotone across iterations") {
    Rng rng(7);
    Eigen::MatrixXd a(30, 3), b(3, 12);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 12; ++j) b(i, j) = rng.normal();
    const Eigen::MatrixXd truth = a * b;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing(30, 12);
    missing.setConstant(false);
    for (int k = 0; k < 36; ++k)
        missing(static_cast<int>(rng.uniform_int(0, 29)), static_cast<int>(rng.uniform_int(0, 11))) = true;

    std::vector<double> rmse_per_iter;
    auto observer = [&](int, const Eigen::MatrixXd& completed) {
        double err = 0.0;
        long count = 0;
        for (int i = 0; i < 30; ++i)
            for (int j = 0; j < 12; ++j)
                if (missing(i, j)) {
                    err += (completed(i, j) - truth(i, j)) * (completed(i, j) - truth(i, j));
                    ++count;
                }
        rmse_per_iter.push_back(std::sqrt(err / static_cast<double>(count)));
    };

    ImputeOptions options;
    options.rank = 3;
    complete_low_rank(truth.unaryExpr([&](double v) { return v; }), missing, options, observer);
    REQUIRE(rmse_per_iter.size() >= 2);
    for (std::size_t i = 1; i < rmse_per_iter.size(); ++i)
        CHECK(rmse_per_iter[i] <= rmse_per_iter[i - 1] + 1e-12);
}

TEST_CASE("complete_low_rank fills a constant matrix with the constant") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(10, 6, 3.25);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing(10, 6);
    missing.setConstant(false);
    missing(2, 3) = missing(7, 1) = missing(0, 0) = true;
    ImputeOptions options;
    options.rank = 1;
    const auto result = complete_low_rank(m, missing, options);
    CHECK(std::abs(result.completed(2, 3) - 3.25) <= 1e-9);
    CHECK(std::abs(result.completed(7, 1) - 3.25) <= 1e-9);
    CHECK(std::abs(result.completed(0, 0) - 3.25) <= 1e-9);
}

TEST_CASE("complete_low_rank rejects an unusable rank") {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Zero(6, 4);
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(6, 4, false);
    ImputeOptions options;
    options.rank = 4;  // >= min(6, 4)
    CHECK_THROWS_AS(complete_low_rank(m, missing, options), RankError);
    options.rank = 0;
    CHECK_THROWS_AS(complete_low_rank(m, missing, options), RankError);
}

TEST_CASE("complete_low_rank reports when the iteration cap is hit") {
    Rng rng(3);
    Eigen::MatrixXd m(12, 8);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 8; ++j) m(i, j) = rng.normal();
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing(12, 8);
    missing.setConstant(false);
    missing(0, 0) = missing(5, 5) = true;
    ImputeOptions options;
    options.rank = 2;
    options.max_iter = 1;
    options.tol = 1e-300;  // unreachable on full-rank noise
    const auto result = complete_low_rank(m, missing, options);
    CHECK_FALSE(result.converged);
    CHECK(result.iterations == 1);
}

TEST_CASE("fill_na_pmus copies from the most correlated donor") {
    // 3 PMUs, PMU 1 is NA
    std::vector<float> raw(4u * 3u * 4u, 0.0f);
    auto tensor = build_tensor(raw, 4, 3, 30.0);
    for (int t = 0; t < 4; ++t)
        for (int c = 0; c < kNumChannels; ++c) {
            tensor.at(t, 0, c) = static_cast<float>(10 * t + c);
            tensor.at(t, 2, c) = static_cast<float>(-5 * t + c);
        }
    auto mask = QualityMask::clear(4, 3);
    mask.na_pmus.insert(1);

    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(3, 3);
    corr(1, 0) = corr(0, 1) = 0.4;
    corr(1, 2) = corr(2, 1) = -0.9;  // largest magnitude wins regardless of sign

    const auto filled = fill_na_pmus(tensor, mask, corr);
    for (int t = 0; t < 4; ++t)
        for (int c = 0; c < kNumChannels; ++c) CHECK(filled.at(t, 1, c) == tensor.at(t, 2, c));

    SUBCASE("ties resolve to the lower PMU index") {
        corr(1, 2) = corr(2, 1) = 0.4;
        const auto tied = fill_na_pmus(tensor, mask, corr);
        for (int t = 0; t < 4; ++t)
            for (int c = 0; c < kNumChannels; ++c) CHECK(tied.at(t, 1, c) == tensor.at(t, 0, c));
    }
    SUBCASE("no NA PMUs leaves the tensor untouched") {
        mask.na_pmus.clear();
        const auto same = fill_na_pmus(tensor, mask, corr);
        CHECK(same.data == tensor.data);
    }
    SUBCASE("all PMUs NA has no donor") {
        mask.na_pmus = {0, 1, 2};
        CHECK_THROWS_AS(fill_na_pmus(tensor, mask, corr), NoDonorError);
    }
}

TEST_CASE("parse_record_csv reads the documented format") {
    std::stringstream in(
        "ts_us,pmu_id,vmag_pu,vang_deg,imag_ka,iang_deg,freq_hz,status\n"
        "0,alpha,1.0,0.0,0.5,10.0,60.0,0\n"
        "33333,alpha,1.01,0.1,0.5,10.1,60.01,0x0001\n"
        "0,beta,0.99,-0.2,0.4,9.0,59.99,0X0002\n");
    const auto records = parse_record_csv(in);
    REQUIRE(records.size() == 3);
    CHECK(records[0].pmu_id == "alpha");
    CHECK(records[0].vmag_pu == doctest::Approx(1.0));
    CHECK(records[1].status == 1);
    CHECK(records[2].status == 2);
    CHECK(records[2].ts_us == 0);
}

TEST_CASE("parse_record_csv rejects malformed input") {
    SUBCASE("wrong header") {
        std::stringstream in("time,pmu\n1,2\n");
        CHECK_THROWS_AS(parse_record_csv(in), ValueError);
    }
    SUBCASE("wrong field count mentions the line") {
        std::stringstream in(
            "ts_us,pmu_id,vmag_pu,vang_deg,imag_ka,iang_deg,freq_hz,status\n"
            "0,alpha,1.0,0.0,0.5\n");
        CHECK_THROWS_WITH_AS(parse_record_csv(in), doctest::Contains("line 2"), ValueError);
    }
    SUBCASE("non-numeric value") {
        std::stringstream in(
            "ts_us,pmu_id,vmag_pu,vang_deg,imag_ka,iang_deg,freq_hz,status\n"
            "0,alpha,abc,0.0,0.5,10.0,60.0,0\n");
        CHECK_THROWS_AS(parse_record_csv(in), ValueError);
    }
}

TEST_CASE("run_quality_pipeline keeps observed values bit-identical") {
    const int n_pmus = 6;
    auto streams = clean_streams(90, n_pmus);
    // vary the clean values so the identity check is meaningful
    Rng rng(17);
    for (auto& stream : streams)
        for (auto& r : stream) {
            r.vmag_pu = 1.0 + 0.01 * rng.normal();
            r.vang_deg = 5.0 * rng.normal();
            r.imag_ka = 0.5 + 0.01 * rng.normal();
            r.iang_deg = 5.0 * rng.normal();
            r.freq_hz = 60.0 + 0.01 * rng.normal();
        }
    // one bad reading on PMU 0
    streams[0][10].freq_hz = 58.0;

    std::vector<PmuRecord> flat;
    for (const auto& stream : streams) flat.insert(flat.end(), stream.begin(), stream.end());

    const auto expected = phasor_to_pqvf(streams, 30.0, stream_ids(n_pmus));
    const auto result = run_quality_pipeline(flat, 30.0);

    CHECK(result.tensor.t_len == 90);
    CHECK(result.tensor.n_pmus == n_pmus);
    CHECK(result.mask.at(10, 0, 3));
    for (int t = 0; t < 90; ++t)
        for (int n = 0; n < n_pmus; ++n)
            for (int c = 0; c < kNumChannels; ++c)
                if (!result.mask.at(t, n, c)) CHECK(result.tensor.at(t, n, c) == expected.tensor.at(t, n, c));
    // the masked entry was replaced with something finite
    CHECK(std::isfinite(result.tensor.at(10, 0, 3)));
    CHECK(result.tensor.at(10, 0, 3) != doctest::Approx(58.0));
}

TEST_CASE("run_quality_pipeline donor-fills NA PMUs when given a reference") {
    auto streams = clean_streams(90);
    Rng rng(23);
    for (auto& stream : streams)
        for (auto& r : stream) {
            r.vmag_pu = 1.0 + 0.01 * rng.normal();
            r.freq_hz = 60.0 + 0.01 * rng.normal();
        }
    // PMU 1 loses 40 consecutive readings: NA at 30 Hz
    for (int t = 20; t < 60; ++t) streams[1][t].status = 0x0001;
    std::vector<PmuRecord> flat;
    for (const auto& stream : streams) flat.insert(flat.end(), stream.begin(), stream.end());

    SUBCASE("without a reference the NA PMU is unfixable") {
        CHECK_THROWS_AS(run_quality_pipeline(flat, 30.0), NoDonorError);
    }
    SUBCASE("with a reference the donor row is copied") {
        Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(2, 2);
        corr(0, 1) = corr(1, 0) = 0.8;
        const auto result = run_quality_pipeline(flat, 30.0, &corr);
        for (int t = 0; t < 90; ++t)
            for (int c = 0; c < kNumChannels; ++c)
                CHECK(result.tensor.at(t, 1, c) == result.tensor.at(t, 0, c));
    }
}
