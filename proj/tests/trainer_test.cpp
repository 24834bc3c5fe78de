#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nvsm/corpus.hpp"
#include "nvsm/model.hpp"
#include "nvsm/rng.hpp"
#include "nvsm/sampler.hpp"
#include "nvsm/trainer.hpp"
#include "support.hpp"

using namespace nvsm;
using Catch::Approx;

namespace {

DocumentStore sentence_store() {
    std::vector<RawDocument> raw{
        {"d0", "red green blue red green blue red green"},
        {"d1", "cat dog bird cat dog bird cat dog"},
        {"d2", "sun moon star sun moon star sun moon"},
    };
    return ingest_corpus(raw, {}, 1000);
}

}  // namespace

TEST_CASE("sigmoid and similarity probability") {
    CHECK(sigmoid(0.0) == Approx(0.5));
    CHECK(sigmoid(std::log(3.0)) == Approx(0.75));
    CHECK(sigmoid(40.0) == Approx(1.0));
    CHECK(sigmoid(-40.0) == Approx(0.0).margin(1e-15));
    CHECK(sigmoid(2.0) + sigmoid(-2.0) == Approx(1.0));

    Matrix docs(1, 2);
    docs(0, 0) = 1.0;
    docs(0, 1) = 2.0;
    std::vector<double> proj{0.5, 0.25};  // dot = 1.0
    CHECK(similarity_prob(docs.row(0), proj) == Approx(sigmoid(1.0)));

    CHECK(clamp_prob(0.5) == 0.5);
    CHECK(clamp_prob(0.0) == kEpsProb);
    CHECK(clamp_prob(1.0) == 1.0 - kEpsProb);
}

TEST_CASE("instance log likelihood matches the closed form at the neutral point") {
    // zero projection makes every probability one half:
    // factor * (z log .5 + z log .5) = (z+1) log .5
    Matrix docs(4, 3);
    Rng rng = rng_for_stream(31, 0);
    for (std::size_t i = 0; i < docs.size(); ++i) docs.data()[i] = uniform_real(rng, -1.0, 1.0);
    std::vector<double> proj{0.0, 0.0, 0.0};
    for (std::size_t z = 1; z <= 4; ++z) {
        std::vector<DocId> negs(z, 2);
        const double ll = instance_log_prob(0, proj, negs, docs);
        CHECK(ll == Approx(static_cast<double>(z + 1) * std::log(0.5)));
    }
    CHECK_THROWS_AS(instance_log_prob(0, proj, {}, docs), UsageError);
}

TEST_CASE("instance log likelihood against explicit arithmetic") {
    Matrix docs(3, 2);
    docs(0, 0) = 0.6; docs(0, 1) = -0.2;
    docs(1, 0) = -0.4; docs(1, 1) = 0.8;
    docs(2, 0) = 0.1; docs(2, 1) = 0.3;
    std::vector<double> proj{0.9, 0.5};
    std::vector<DocId> negs{1, 2, 1};

    const double p_pos = 1.0 / (1.0 + std::exp(-(0.6 * 0.9 + -0.2 * 0.5)));
    const double p_n1 = 1.0 / (1.0 + std::exp(-(-0.4 * 0.9 + 0.8 * 0.5)));
    const double p_n2 = 1.0 / (1.0 + std::exp(-(0.1 * 0.9 + 0.3 * 0.5)));
    const double expected =
        (4.0 / 6.0) * (3.0 * std::log(p_pos) + 2.0 * std::log(1.0 - p_n1) + std::log(1.0 - p_n2));
    CHECK(instance_log_prob(0, proj, negs, docs) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("batch loss equals an independent scalar reimplementation") {
    auto c = testsupport::random_grad_case(555);
    const std::size_t m = c.batch.size();
    const std::size_t n = c.batch.ngram_width;
    const std::size_t z = c.negatives.size() / m;
    const std::size_t d_w = c.params.word_vectors.cols();
    const std::size_t d_d = c.params.doc_vectors.cols();

    // forward, written longhand
    std::vector<std::vector<double>> s(m, std::vector<double>(d_d, 0.0));
    {
        std::vector<std::vector<double>> raw(m, std::vector<double>(d_d, 0.0));
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<double> avg(d_w, 0.0);
            for (std::size_t t = 0; t < n; ++t) {
                const TermId w = c.batch.ngram_token_ids[i * n + t];
                for (std::size_t k = 0; k < d_w; ++k) avg[k] += c.params.word_vectors(w, k);
            }
            double norm = 0.0;
            for (std::size_t k = 0; k < d_w; ++k) {
                avg[k] /= static_cast<double>(n);
                norm += avg[k] * avg[k];
            }
            norm = std::sqrt(norm);
            for (std::size_t j = 0; j < d_d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d_w; ++k) {
                    acc += c.params.transform(j, k) * avg[k] / norm;
                }
                raw[i][j] = acc;
            }
        }
        for (std::size_t j = 0; j < d_d; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += raw[i][j];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t i = 0; i < m; ++i) var += (raw[i][j] - mean) * (raw[i][j] - mean);
            var /= static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) {
                double v = (raw[i][j] - mean) / std::sqrt(var + 1e-6) + c.params.bias[j];
                if (v > 1.0) v = 1.0;
                if (v < -1.0) v = -1.0;
                s[i][j] = v;
            }
        }
    }

    auto prob = [&](DocId d, const std::vector<double>& proj) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d_d; ++j) acc += c.params.doc_vectors(d, j) * proj[j];
        return 1.0 / (1.0 + std::exp(-acc));
    };
    auto clamp = [](double p) {
        if (p < 1e-12) return 1e-12;
        if (p > 1.0 - 1e-12) return 1.0 - 1e-12;
        return p;
    };
    double total = 0.0;
    const double factor = static_cast<double>(z + 1) / (2.0 * static_cast<double>(z));
    for (std::size_t i = 0; i < m; ++i) {
        double ll = static_cast<double>(z) * std::log(clamp(prob(c.batch.source_doc_ids[i], s[i])));
        for (std::size_t k = 0; k < z; ++k) {
            ll += std::log(1.0 - clamp(prob(c.negatives[i * z + k], s[i])));
        }
        total += factor * ll;
    }
    double expected = -total / static_cast<double>(m);
    double reg = c.params.word_vectors.frobenius_squared() +
                 c.params.doc_vectors.frobenius_squared() +
                 c.params.transform.frobenius_squared();
    expected += c.lambda / (2.0 * static_cast<double>(m)) * reg;

    CHECK(batch_loss(c.params, c.batch, c.negatives, c.lambda) ==
          Approx(expected).epsilon(1e-12));
}

TEST_CASE("regularizer scales with lambda and ignores the bias") {
    auto c = testsupport::random_grad_case(777);
    const double m = static_cast<double>(c.batch.size());
    const double base = batch_loss(c.params, c.batch, c.negatives, 0.0);
    const double reg_norms = c.params.word_vectors.frobenius_squared() +
                             c.params.doc_vectors.frobenius_squared() +
                             c.params.transform.frobenius_squared();
    for (double lambda : {0.01, 0.5, 2.0}) {
        const double loss = batch_loss(c.params, c.batch, c.negatives, lambda);
        CHECK(loss - base == Approx(lambda / (2.0 * m) * reg_norms).epsilon(1e-9));
    }
    // bias never enters the regularizer: grow it and compare the lambda term
    auto shifted = c;
    for (auto& b : shifted.params.bias) b += 100.0;
    const double shifted_base = batch_loss(shifted.params, shifted.batch, shifted.negatives, 0.0);
    const double shifted_reg = batch_loss(shifted.params, shifted.batch, shifted.negatives, 0.7);
    CHECK(shifted_reg - shifted_base == Approx(0.7 / (2.0 * m) * reg_norms).epsilon(1e-9));
}

TEST_CASE("analytic gradients agree with central differences") {
    const double worst = testsupport::gradient_check_over_cases(20);
    CHECK(worst < 1e-4);
}

TEST_CASE("loss reported by the gradient pass equals batch_loss") {
    for (std::uint64_t seed : {101, 202, 303}) {
        auto c = testsupport::random_grad_case(seed);
        auto result = batch_gradients(c.params, c.batch, c.negatives, c.lambda);
        CHECK(result.loss == Approx(batch_loss(c.params, c.batch, c.negatives, c.lambda))
                                 .epsilon(1e-12));
    }
}

TEST_CASE("rows untouched by the batch receive only the regularizer gradient") {
    auto c = testsupport::random_grad_case(404);
    // force the batch to avoid word id 0 and doc id 0
    for (auto& w : c.batch.ngram_token_ids) {
        if (w == 0) w = 1;
    }
    for (auto& d : c.batch.source_doc_ids) {
        if (d == 0) d = 1;
    }
    for (auto& d : c.negatives) {
        if (d == 0) d = 1;
    }
    c.lambda = 0.25;
    const double scale = c.lambda / static_cast<double>(c.batch.size());
    auto result = batch_gradients(c.params, c.batch, c.negatives, c.lambda);
    for (std::size_t k = 0; k < c.params.word_vectors.cols(); ++k) {
        CHECK(result.grads.word_vectors(0, k) == scale * c.params.word_vectors(0, k));
    }
    for (std::size_t k = 0; k < c.params.doc_vectors.cols(); ++k) {
        CHECK(result.grads.doc_vectors(0, k) == scale * c.params.doc_vectors(0, k));
    }
}

TEST_CASE("bias gradient is independent of lambda") {
    auto c = testsupport::random_grad_case(505);
    auto a = batch_gradients(c.params, c.batch, c.negatives, 0.0);
    auto b = batch_gradients(c.params, c.batch, c.negatives, 3.0);
    REQUIRE(a.grads.bias.size() == b.grads.bias.size());
    for (std::size_t j = 0; j < a.grads.bias.size(); ++j) {
        CHECK(a.grads.bias[j] == b.grads.bias[j]);
    }
}

TEST_CASE("gradient pass rejects a ragged negatives block") {
    auto c = testsupport::random_grad_case(606);
    std::vector<DocId> ragged(c.negatives.begin(), c.negatives.end());
    ragged.push_back(0);
    CHECK_THROWS_AS(batch_gradients(c.params, c.batch, ragged, 0.0), UsageError);
    CHECK_THROWS_AS(
        batch_gradients(c.params, c.batch, std::vector<DocId>{}, 0.0), UsageError);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
    Rng rng = rng_for_stream(32, 0);
    auto params = init_parameters(3, 2, 2, 2, rng);
    auto before = params;
    Gradients zero;
    zero.word_vectors = Matrix(3, 2);
    zero.doc_vectors = Matrix(2, 2);
    zero.transform = Matrix(2, 2);
    zero.bias.assign(2, 0.0);
    AdamState state(params);
    adam_step(params, zero, state, 0.001);
    CHECK(params.word_vectors == before.word_vectors);
    CHECK(params.doc_vectors == before.doc_vectors);
    CHECK(params.transform == before.transform);
    CHECK(params.bias == before.bias);
    CHECK(state.step == 1);
}

TEST_CASE("first adam step moves by roughly the learning rate against the sign") {
    Rng rng = rng_for_stream(33, 0);
    auto params = init_parameters(3, 2, 2, 2, rng);
    auto before = params;
    Gradients grads;
    grads.word_vectors = Matrix(3, 2);
    grads.doc_vectors = Matrix(2, 2);
    grads.transform = Matrix(2, 2);
    grads.bias.assign(2, 0.0);
    for (std::size_t i = 0; i < grads.word_vectors.size(); ++i) {
        grads.word_vectors.data()[i] = (i % 2 == 0) ? 2.5 : -0.3;
    }
    grads.bias[0] = 1.0;
    grads.bias[1] = -4.0;

    AdamState state(params);
    const double alpha = 0.01;
    adam_step(params, grads, state, alpha);
    for (std::size_t i = 0; i < params.word_vectors.size(); ++i) {
        const double g = grads.word_vectors.data()[i];
        const double delta = params.word_vectors.data()[i] - before.word_vectors.data()[i];
        CHECK(delta == Approx(-alpha * (g > 0 ? 1.0 : -1.0)).epsilon(1e-6));
    }
    CHECK(params.bias[0] - before.bias[0] == Approx(-alpha).epsilon(1e-6));
    CHECK(params.bias[1] - before.bias[1] == Approx(alpha).epsilon(1e-6));
    // zero-gradient coordinates do not move
    CHECK(params.doc_vectors == before.doc_vectors);
}

TEST_CASE("adam trajectory matches a scalar reference") {
    // single parameter theta = 0, constant gradient g = 0.7
    Rng rng = rng_for_stream(34, 0);
    auto params = init_parameters(1, 1, 1, 1, rng);
    params.word_vectors(0, 0) = 0.0;
    params.doc_vectors(0, 0) = 0.0;
    params.transform(0, 0) = 0.0;
    Gradients grads;
    grads.word_vectors = Matrix(1, 1, 0.7);
    grads.doc_vectors = Matrix(1, 1);
    grads.transform = Matrix(1, 1);
    grads.bias.assign(1, 0.0);

    const double alpha = 0.1, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    AdamState state(params);
    double theta = 0.0, m1 = 0.0, v1 = 0.0;
    for (int t = 1; t <= 5; ++t) {
        adam_step(params, grads, state, alpha, beta1, beta2, eps);
        m1 = beta1 * m1 + (1.0 - beta1) * 0.7;
        v1 = beta2 * v1 + (1.0 - beta2) * 0.49;
        const double mhat = m1 / (1.0 - std::pow(beta1, t));
        const double vhat = v1 / (1.0 - std::pow(beta2, t));
        theta -= alpha * mhat / (std::sqrt(vhat) + eps);
        CHECK(params.word_vectors(0, 0) == Approx(theta).epsilon(1e-12));
    }
}

TEST_CASE("a regularized step perturbs every parameter") {
    auto c = testsupport::random_grad_case(808);
    c.lambda = 0.1;
    auto result = batch_gradients(c.params, c.batch, c.negatives, c.lambda);
    auto before = c.params;
    AdamState state(c.params);
    adam_step(c.params, result.grads, state, 0.01);
    std::size_t moved = 0, total = 0;
    auto count = [&](const Matrix& now, const Matrix& was) {
        for (std::size_t i = 0; i < now.size(); ++i) {
            ++total;
            moved += (now.data()[i] != was.data()[i]);
        }
    };
    count(c.params.word_vectors, before.word_vectors);
    count(c.params.doc_vectors, before.doc_vectors);
    count(c.params.transform, before.transform);
    CHECK(moved == total);
}

TEST_CASE("gradient descent drives the positive probability up") {
    Rng rng = rng_for_stream(35, 0);
    auto params = init_parameters(4, 2, 4, 3, rng);
    params.ngram_width = 2;

    Batch batch;
    batch.ngram_width = 2;
    batch.ngram_token_ids = {0, 1, 2, 3};
    batch.source_doc_ids = {0, 1};
    std::vector<DocId> negatives{1, 0};  // each instance's negative is the other doc

    auto mean_positive_prob = [&]() {
        Matrix raw(2, 3);
        for (std::size_t i = 0; i < 2; ++i) {
            auto p = project_raw(batch.ngram(i), params);
            for (std::size_t j = 0; j < 3; ++j) raw(i, j) = p[j];
        }
        auto [act, stats] = standardize_batch(raw, params.bias);
        return 0.5 * (similarity_prob(params.doc_vectors.row(0), act.row(0)) +
                      similarity_prob(params.doc_vectors.row(1), act.row(1)));
    };

    const double p_start = mean_positive_prob();
    AdamState state(params);
    double first_loss = 0.0, last_loss = 0.0;
    for (int step = 0; step < 80; ++step) {
        auto result = batch_gradients(params, batch, negatives, 0.0);
        if (step == 0) first_loss = result.loss;
        last_loss = result.loss;
        adam_step(params, result.grads, state, 0.05);
    }
    const double p_end = mean_positive_prob();
    CHECK(p_end > p_start);
    CHECK(p_end > 0.9);
    CHECK(last_loss < first_loss);
}

TEST_CASE("config validation rejects out-of-range settings") {
    TrainConfig good;
    good.batch_size = 4;
    CHECK_NOTHROW(good.validate());

    auto bad = good;
    bad.word_dim = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = good;
    bad.negatives = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = good;
    bad.batch_size = 1;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = good;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = good;
    bad.regularization = -0.1;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = good;
    bad.adam_beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = good;
    bad.workers = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("training emits seeded, reproducible checkpoints") {
    auto store = sentence_store();
    TrainConfig config;
    config.word_dim = 4;
    config.doc_dim = 3;
    config.ngram_width = 2;
    config.negatives = 2;
    config.batch_size = 4;
    config.iterations = 2;
    config.learning_rate = 0.01;
    config.seed = 9;

    auto run_a = train_collect(store, config);
    auto run_b = train_collect(store, config);
    REQUIRE(run_a.size() == 3);  // init + 2 iterations
    for (std::size_t i = 0; i < run_a.size(); ++i) {
        CHECK(run_a[i].iteration == i);
        CHECK(run_a[i].ngram_width == 2);
        CHECK(run_a[i].vocabulary_hash == store.vocabulary().content_hash());
        CHECK(run_a[i].word_vectors == run_b[i].word_vectors);
        CHECK(run_a[i].doc_vectors == run_b[i].doc_vectors);
        CHECK(run_a[i].transform == run_b[i].transform);
        CHECK(run_a[i].bias == run_b[i].bias);
    }
    // training moved the parameters
    CHECK(run_a[0].word_vectors != run_a[2].word_vectors);

    auto different_seed = config;
    different_seed.seed = 10;
    auto run_c = train_collect(store, different_seed);
    CHECK(run_a[2].word_vectors != run_c[2].word_vectors);
}

TEST_CASE("worker count cannot change the trained model") {
    auto store = sentence_store();
    TrainConfig config;
    config.word_dim = 4;
    config.doc_dim = 3;
    config.ngram_width = 2;
    config.negatives = 2;
    config.batch_size = 4;
    config.iterations = 2;
    config.seed = 11;

    auto serial = train_collect(store, config);
    config.workers = 3;
    auto parallel = train_collect(store, config);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].word_vectors == parallel[i].word_vectors);
        CHECK(serial[i].doc_vectors == parallel[i].doc_vectors);
        CHECK(serial[i].transform == parallel[i].transform);
        CHECK(serial[i].bias == parallel[i].bias);
    }
}

TEST_CASE("zero iterations still checkpoints the initialization") {
    auto store = sentence_store();
    TrainConfig config;
    config.word_dim = 4;
    config.doc_dim = 3;
    config.ngram_width = 2;
    config.batch_size = 4;
    config.iterations = 0;
    auto checkpoints = train_collect(store, config);
    REQUIRE(checkpoints.size() == 1);
    CHECK(checkpoints[0].iteration == 0);
    for (double b : checkpoints[0].bias) CHECK(b == 0.0);
}

TEST_CASE("batch log reports every batch of every iteration") {
    auto store = sentence_store();
    TrainConfig config;
    config.word_dim = 4;
    config.doc_dim = 3;
    config.ngram_width = 2;
    config.negatives = 2;
    config.batch_size = 4;
    config.iterations = 3;

    const std::size_t per_epoch = batches_per_epoch(store, config.batch_size, config.ngram_width);
    REQUIRE(per_epoch > 0);
    std::vector<std::tuple<std::size_t, std::size_t, double>> log;
    train(store, config, {}, [&](std::size_t iter, std::size_t b, double loss) {
        log.emplace_back(iter, b, loss);
    });
    REQUIRE(log.size() == per_epoch * 3);
    std::size_t idx = 0;
    for (std::size_t iter = 1; iter <= 3; ++iter) {
        for (std::size_t b = 0; b < per_epoch; ++b, ++idx) {
            CHECK(std::get<0>(log[idx]) == iter);
            CHECK(std::get<1>(log[idx]) == b);
            CHECK(std::isfinite(std::get<2>(log[idx])));
        }
    }
}

TEST_CASE("training refuses a corpus with no eligible documents") {
    std::vector<RawDocument> raw{{"d0", "one two"}};
    auto store = ingest_corpus(raw, {}, 10);
    TrainConfig config;
    config.ngram_width = 10;
    config.batch_size = 4;
    CHECK_THROWS_AS(train_collect(store, config), DataError);
}
