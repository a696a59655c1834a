#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mindisc/evaluation.hpp"
#include "support.hpp"

namespace mindisc {
namespace {

// Single identity layer: logits are the features themselves.
Network identity_net(std::size_t classes) {
  Network net;
  net.specs = {{classes, classes, Activation::Identity}};
  net.params.weights = {Matrix::identity(classes)};
  net.params.biases = {Matrix(1, classes)};
  return net;
}

Dataset one_hot_set(const std::vector<int>& predicted, const std::vector<int>& truth,
                    std::size_t classes) {
  Dataset d;
  d.features = Matrix(predicted.size(), classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    d.features(i, static_cast<std::size_t>(predicted[i])) = 1.0;
  }
  d.labels = truth;
  d.num_classes = classes;
  return d;
}

TEST(Accuracy, PerfectClassifier) {
  Rng rng(1);
  const auto y = testing::random_labels(rng, 50, 4);
  EXPECT_EQ(accuracy(identity_net(4), one_hot_set(y, y, 4)), 100.0);
}

TEST(Accuracy, SevenHundredFortySevenOfAThousand) {
  std::vector<int> pred(1000, 0), truth(1000, 0);
  for (std::size_t i = 747; i < 1000; ++i) truth[i] = 1;
  const double a = accuracy(identity_net(2), one_hot_set(pred, truth, 2));
  EXPECT_DOUBLE_EQ(a, 74.7);
  EXPECT_EQ(format_accuracy(a), "accuracy=74.70");
  EXPECT_EQ(format_accuracy(100.0), "accuracy=100.00");
  EXPECT_EQ(format_accuracy(0.0), "accuracy=0.00");
}

TEST(Accuracy, ZeroNetTiesGoToClassZero) {
  Network zero = identity_net(3);
  zero.params.weights[0] = Matrix(3, 3);
  Rng rng(2);
  Dataset d;
  d.features = testing::random_matrix(rng, 100, 3);
  d.labels = std::vector<int>(100, 2);
  for (std::size_t i = 0; i < 30; ++i) (*d.labels)[i * 3] = 0;
  d.num_classes = 3;
  std::size_t class0 = 0;
  for (int y : *d.labels) class0 += y == 0 ? 1 : 0;
  EXPECT_EQ(class0, 30u);
  EXPECT_DOUBLE_EQ(accuracy(zero, d), 30.0);
}

TEST(Accuracy, Errors) {
  Dataset empty;
  empty.features = Matrix(0, 2);
  empty.labels = std::vector<int>{};
  empty.num_classes = 2;
  try {
    accuracy(identity_net(2), empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyDataset);
  }
  Dataset unlabeled;
  unlabeled.features = Matrix(3, 2);
  try {
    accuracy(identity_net(2), unlabeled);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnlabeledDataset);
  }
}

TEST(Accuracy, InvariantUnderIncreasingTransformOfLogits) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    Dataset d;
    d.features = testing::random_matrix(rng, 40, 4, 3.0);
    d.labels = testing::random_labels(rng, 40, 4);
    d.num_classes = 4;
    const double base = accuracy(identity_net(4), d);
    Dataset warped = d;
    const double scale = rng.uniform(0.1, 5.0), shift = rng.uniform(-3, 3);
    for (double& v : warped.features.data()) v = std::exp(scale * v) + shift;
    EXPECT_EQ(accuracy(identity_net(4), warped), base);
  }
}

TEST(Accuracy, ConsistentUnderRelabeling) {
  Rng rng(4);
  Dataset d;
  d.features = testing::random_matrix(rng, 60, 3);
  d.labels = testing::random_labels(rng, 60, 3);
  d.num_classes = 3;
  const Network net = identity_net(3);
  const std::vector<int> perm{2, 0, 1};
  auto pred = predict(net, d.features);
  std::vector<int> permuted_truth, permuted_pred;
  for (std::size_t i = 0; i < 60; ++i) {
    permuted_truth.push_back(perm[static_cast<std::size_t>((*d.labels)[i])]);
    permuted_pred.push_back(perm[static_cast<std::size_t>(pred[i])]);
  }
  EXPECT_EQ(accuracy_percent(permuted_pred, permuted_truth), accuracy(net, d));
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.widths = {2, 8, 8, 2};
  c.epochs = 2;
  c.batch_size = 16;
  c.lr = 0.05;
  return c;
}

std::vector<TransferTask> tiny_tasks() {
  return {{"R0->R30", gen_two_moons(64, 0.15, 0, 101), gen_two_moons(64, 0.15, 30, 202)},
          {"R0->R15", gen_two_moons(64, 0.15, 0, 101), gen_two_moons(64, 0.15, 15, 202)}};
}

TEST(Benchmark, OneTaskOneMethodTwoSeeds) {
  const auto tasks = tiny_tasks();
  const auto table =
      run_benchmark({tasks[0]}, {*find_standard_method("joint")}, {1, 2}, tiny_config());
  ASSERT_EQ(table.cells.size(), 2u);
  ASSERT_EQ(table.means.size(), 1u);
  EXPECT_NEAR(table.means[0].accuracy, (table.cells[0].accuracy + table.cells[1].accuracy) / 2,
              1e-9);
  const std::string csv = table.to_csv();
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "task,method,seed,accuracy");
  EXPECT_EQ(lines[1].substr(0, 16), "R0->R30,joint,1,");
  EXPECT_EQ(lines[3].substr(0, 15), "avg,joint,mean,");
}

TEST(Benchmark, OrderingMeansAndThreadIndependence) {
  const auto tasks = tiny_tasks();
  const auto methods = standard_methods();
  const auto serial = run_benchmark(tasks, methods, {1, 2}, tiny_config(), 1);
  const auto parallel = run_benchmark(tasks, methods, {1, 2}, tiny_config(), 3);
  EXPECT_EQ(serial.to_csv(), parallel.to_csv());
  ASSERT_EQ(serial.cells.size(), 2u * 4u * 2u);
  for (std::size_t i = 1; i < serial.cells.size(); ++i) {
    const auto& a = serial.cells[i - 1];
    const auto& b = serial.cells[i];
    EXPECT_LE(std::tie(a.task, a.method, a.seed), std::tie(b.task, b.method, b.seed));
  }
  for (const auto& m : serial.means) {
    EXPECT_NEAR(m.accuracy, serial.mean_accuracy(m.method), 1e-9);
    EXPECT_EQ(m.count, 4u);
  }
  for (const auto& c : serial.cells) {
    EXPECT_GE(c.accuracy, 0.0);
    EXPECT_LE(c.accuracy, 100.0);
  }
}

TEST(Benchmark, StandardMethodsZeroTheRightTerms) {
  const auto m = standard_methods();
  ASSERT_EQ(m.size(), 4u);
  EXPECT_FALSE(m[0].weights.adapts());
  EXPECT_EQ(m[1].weights.mmd_rep, 0.0);
  EXPECT_EQ(m[1].weights.coral_rep, 1.0);
  EXPECT_EQ(m[2].weights.coral_logit, 0.0);
  EXPECT_EQ(m[2].weights.mmd_logit, 1.0);
  EXPECT_EQ(m[3].weights, LossWeights{});
  EXPECT_FALSE(find_standard_method("nope").has_value());
}

TEST(Benchmark, Validation) {
  const auto tasks = tiny_tasks();
  EXPECT_THROW(run_benchmark({}, standard_methods(), {1}, tiny_config()), Error);
  EXPECT_THROW(run_benchmark(tasks, {}, {1}, tiny_config()), Error);
  EXPECT_THROW(run_benchmark(tasks, standard_methods(), {}, tiny_config()), Error);
}

TEST(Embedding, SchemaAndRowCount) {
  const Dataset s = gen_two_moons(100, 0.15, 0, 1);
  Dataset t = gen_two_moons(100, 0.15, 30, 2);
  t.domain_name = "target";
  t.labels.reset();
  const auto path = (std::filesystem::temp_directory_path() / "mindisc_embed.csv").string();
  const TrainConfig c = tiny_config();
  const Network untrained = init_network(c.layer_specs(), 3);
  const Network trained = train(c, s.labeled(), t.unlabeled()).network;

  std::vector<std::string> files;
  for (const Network* net : {&untrained, &trained}) {
    export_embedding(*net, s, t, path);
    std::ifstream in(path, std::ios::binary);
    files.emplace_back((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  for (const auto& text : files) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "x,y,domain,label");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      std::istringstream cells(line);
      std::string x, y, domain, label;
      std::getline(cells, x, ',');
      std::getline(cells, y, ',');
      std::getline(cells, domain, ',');
      std::getline(cells, label, ',');
      EXPECT_TRUE(std::isfinite(std::stod(x)) && std::isfinite(std::stod(y)));
      if (rows >= 100) {
        EXPECT_EQ(domain, "target");
        EXPECT_EQ(label, "-1");
      } else {
        EXPECT_EQ(domain, "two-moons");
        EXPECT_TRUE(label == "0" || label == "1");
      }
      ++rows;
    }
    EXPECT_EQ(rows, 200u);
  }
  std::filesystem::remove(path);
}

TEST(Embedding, SameDomainTwiceGivesIdenticalCopies) {
  const Dataset s = gen_two_moons(40, 0.15, 0, 1);
  const Embedding e = compute_embedding(init_network(mlp_specs({2, 6, 5, 2}), 4), s, s);
  EXPECT_EQ(std::set<std::string>(e.domain.begin(), e.domain.end()).size(), 1u);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(e.coords(i, 0), e.coords(40 + i, 0));
    EXPECT_EQ(e.coords(i, 1), e.coords(40 + i, 1));
  }
  EXPECT_NEAR(e.centroid_distance(), 0.0, 1e-12);
}

TEST(Embedding, CentroidStatistics) {
  Embedding e;
  e.coords = Matrix{{0, 0}, {2, 0}, {0, 4}, {2, 4}};
  e.source_rows = 2;
  EXPECT_NEAR(e.centroid_distance(), 4.0, 1e-15);
  EXPECT_NEAR(e.spread(), std::sqrt(5.0), 1e-15);
}

TEST(Embedding, EmptyInputIsRejected) {
  Dataset empty;
  empty.features = Matrix(0, 2);
  EXPECT_THROW(compute_embedding(init_network(mlp_specs({2, 4, 2}), 1), empty,
                                 gen_two_moons(10, 0.1, 0, 1)),
               Error);
}

}  // namespace
}  // namespace mindisc
