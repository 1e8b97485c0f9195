#include <gtest/gtest.h>

#include <filesystem>

#include "keygaze/autodiff/checkpoint.hpp"
#include "keygaze/autodiff/grad_check.hpp"
#include "keygaze/autodiff/optim.hpp"
#include "primitives.hpp"

using namespace keygaze;
using namespace keygaze::ad;

namespace {

Mat row(std::initializer_list<double> v) {
    Mat m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) m(0, i++) = x;
    return m;
}

} // namespace

TEST(Tensor, MatmulKnownProduct) {
    Mat a(2, 3), b(3, 2);
    a << 1, 2, 3, 4, 5, 6;
    b << 1, 0, 0, 1, 0, 0;
    const Mat c = matmul(Tensor::constant(a), Tensor::constant(b)).value();
    EXPECT_EQ(c(0, 0), 1);
    EXPECT_EQ(c(0, 1), 2);
    EXPECT_EQ(c(1, 0), 4);
    EXPECT_EQ(c(1, 1), 5);
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3));
        FAIL();
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("(2x3)"), std::string::npos) << e.what();
    }
    EXPECT_THROW(add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)), UsageError);
}

TEST(Tensor, SoftmaxOfZerosIsUniform) {
    const Mat s = softmax(Tensor::constant(row({0, 0, 0}))).value();
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(s(0, i), 1.0 / 3.0, 1e-15);
}

TEST(Tensor, MaskedSoftmaxZeroesMaskedEntries) {
    Mat mask = row({1, 0, 1});
    const Mat s = softmax(Tensor::constant(row({5, 100, 5})), 1, &mask).value();
    EXPECT_EQ(s(0, 1), 0.0);
    EXPECT_NEAR(s(0, 0), 0.5, 1e-15);
}

TEST(Tensor, GradientOfSumOfSquares) {
    Tensor x = Tensor::parameter(row({1, 2}));
    sum(square(x)).backward();
    EXPECT_EQ(x.grad()(0, 0), 2.0);
    EXPECT_EQ(x.grad()(0, 1), 4.0);
}

TEST(Tensor, RepeatedBackwardAccumulates) {
    Tensor x = Tensor::parameter(row({1, 2}));
    const Tensor y = sum(square(x));
    y.backward();
    y.backward();
    EXPECT_EQ(x.grad()(0, 1), 8.0);
    x.zero_grad();
    y.backward();
    EXPECT_EQ(x.grad()(0, 1), 4.0);
}

TEST(Tensor, ForwardIsDeterministic) {
    std::mt19937_64 eng(1);
    const Mat a = kgtest::random_mat(eng, 3, 4);
    auto f = [&] { return layer_norm(Tensor::constant(a), Tensor::constant(Mat::Ones(1, 4)), Tensor::zeros(1, 4)).value(); };
    EXPECT_EQ(f(), f());
}

TEST(GradCheck, SquareAtThree) {
    const auto r = grad_check([](const std::vector<Tensor>& x) { return square(x[0]); }, {Mat::Constant(1, 1, 3.0)});
    EXPECT_LT(r.max_abs_error, 1e-6);
    Tensor x = Tensor::parameter(Mat::Constant(1, 1, 3.0));
    square(x).backward();
    EXPECT_EQ(x.grad()(0, 0), 6.0);
}

TEST(GradCheck, ConstantFunction) {
    const auto r = grad_check([](const std::vector<Tensor>& x) { return add_scalar(scale(sum(x[0]), 0.0), 4.0); },
                              {Mat::Ones(2, 2)});
    EXPECT_LT(r.max_abs_error, 1e-12);
}

TEST(GradCheck, TwoLayerNetworkWithFiftyParameters) {
    std::mt19937_64 eng(2);
    // 3 -> 8 -> 2 with biases: 24 + 8 + 16 + 2 = 50
    const Mat x = kgtest::random_mat(eng, 4, 3);
    auto f = [x](const std::vector<Tensor>& p) {
        const Tensor h = tanh(add(matmul(Tensor::constant(x), p[0]), p[1]));
        return mean(square(add(matmul(h, p[2]), p[3])));
    };
    std::vector<Mat> params = {kgtest::random_mat(eng, 3, 8), kgtest::random_mat(eng, 1, 8),
                               kgtest::random_mat(eng, 8, 2), kgtest::random_mat(eng, 1, 2)};
    const auto r = grad_check(f, params, 1e-5);
    EXPECT_EQ(r.coordinates, 50u);
    EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(GradCheck, NonFiniteInputThrows) {
    EXPECT_THROW(grad_check([](const std::vector<Tensor>& x) { return sum(x[0]); },
                            {Mat::Constant(1, 1, std::nan(""))}),
                 NumericalError);
}

TEST(GradCheck, EveryPrimitiveOnTwentyRandomInstances) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (const auto& c : kgtest::primitive_cases(seed)) {
            const auto r = grad_check(c.f, c.inputs);
            EXPECT_LT(r.max_rel_error, 1e-4) << c.name << " seed " << seed;
        }
    }
}

TEST(Adam, ZeroGradientNoDecayLeavesParameters) {
    Tensor p = Tensor::parameter(row({1.5, -2}));
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam opt({{"p", p}}, cfg);
    opt.zero_grad();
    opt.step(0.1);
    EXPECT_EQ(p.value()(0, 0), 1.5);
    EXPECT_EQ(p.value()(0, 1), -2.0);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, StepDescendsAndKeepsShape) {
    Tensor p = Tensor::parameter(Mat::Constant(1, 1, 1.0));
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam opt({{"p", p}}, cfg);
    opt.zero_grad();
    square(p).backward();
    opt.step(0.1);
    EXPECT_LT(p.value()(0, 0), 1.0);
    EXPECT_EQ(p.rows(), 1);
    EXPECT_EQ(p.cols(), 1);
}

TEST(Adam, ConvergesOnConvexQuadratic) {
    // f(p) = sum(a * (p - b)^2)
    Tensor p = Tensor::parameter(row({3, -2, 1}));
    const Tensor a = Tensor::constant(row({1, 2, 0.5})), b = Tensor::constant(row({0.5, 0.25, -1}));
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam opt({{"p", p}}, cfg);
    std::vector<double> hist;
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        const Tensor f = sum(mul(a, square(sub(p, b))));
        hist.push_back(f.item());
        f.backward();
        opt.step(lr_schedule(i, 0.1, 0.5, 50));
    }
    EXPECT_LT(hist.back(), hist.front() * 1e-3);
    EXPECT_LT(hist.back(), 1e-3);
}

TEST(Adam, NonFiniteGradientThrows) {
    Tensor p = Tensor::parameter(Mat::Constant(1, 1, 0.0));
    Adam opt({{"p", p}});
    opt.zero_grad();
    p.mutable_grad()(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(opt.step(), NumericalError);
}

TEST(Adam, DecoupledWeightDecay) {
    Tensor p = Tensor::parameter(Mat::Constant(1, 1, 2.0));
    AdamConfig cfg;
    cfg.weight_decay = 0.5;
    Adam opt({{"p", p}}, cfg);
    opt.zero_grad();
    opt.step(0.1);
    EXPECT_DOUBLE_EQ(p.value()(0, 0), 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(LrSchedule, StepFunction) {
    EXPECT_DOUBLE_EQ(lr_schedule(0), 5e-5);
    EXPECT_DOUBLE_EQ(lr_schedule(99), 5e-5);
    EXPECT_NEAR(lr_schedule(100), 4.85e-5, 1e-18);
    EXPECT_NEAR(lr_schedule(250), 4.7045e-5, 1e-18);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    std::mt19937_64 eng(3);
    Checkpoint c;
    c.step = 1234;
    c.metadata = R"({"kind":"test"})";
    c.tensors["a"] = kgtest::random_mat(eng, 3, 5);
    c.tensors["b/c"] = kgtest::random_mat(eng, 1, 1);
    const auto path = std::filesystem::temp_directory_path() / "keygaze_ad_ckpt.bin";
    save_checkpoint(path, c);
    const auto d = load_checkpoint(path);
    EXPECT_EQ(d.step, 1234u);
    EXPECT_EQ(d.metadata, c.metadata);
    ASSERT_EQ(d.tensors.size(), 2u);
    EXPECT_EQ(d.at("a"), c.at("a"));
    EXPECT_EQ(serialize(d), serialize(c));
}

TEST(Checkpoint, TruncationAndCorruptionAreDataErrors) {
    Checkpoint c;
    c.tensors["w"] = Mat::Ones(2, 2);
    const std::string bytes = serialize(c);
    EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), DataError);
    EXPECT_THROW(deserialize("NOTACKPT" + bytes.substr(8)), DataError);
    EXPECT_THROW(deserialize(bytes + "x"), DataError);
    EXPECT_THROW(c.at("missing"), DataError);
}

TEST(Checkpoint, OptimizerStateRestores) {
    Tensor p = Tensor::parameter(row({1, 2}));
    Adam opt({{"p", p}});
    for (int i = 0; i < 3; ++i) {
        opt.zero_grad();
        sum(square(p)).backward();
        opt.step(0.01);
    }
    Checkpoint c;
    store_optimizer(c, opt);
    Tensor q = Tensor::parameter(row({0, 0}));
    Adam opt2({{"p", q}});
    restore_optimizer(c, opt2);
    EXPECT_EQ(q.value(), p.value());
    EXPECT_EQ(opt2.steps(), 3u);
    EXPECT_EQ(opt2.first_moments()[0], opt.first_moments()[0]);
    Tensor wrong = Tensor::parameter(Mat::Zero(3, 1));
    EXPECT_THROW(load_parameters(c, {{"p", wrong}}), DataError);
}
