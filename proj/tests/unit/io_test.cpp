#include <gtest/gtest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "comprf/io.hpp"

using namespace comprf;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("comprf_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }

  std::string write(const std::string& name, const std::string& content) const {
    const auto p = (path_ / name).string();
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(LoadCsv, IntegerLabels) {
  TempDir dir;
  const auto p = dir.write("a.csv", "1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,0\n");
  const Dataset ds = load_csv(p, -1L, TaskKind::classification);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.dimension(), 2u);
  EXPECT_EQ(ds.class_count, 2u);
  EXPECT_DOUBLE_EQ((*ds.values)(2, 1), 6.0);
}

TEST(LoadCsv, StringLabelsFirstAppearance) {
  TempDir dir;
  const auto p = dir.write("a.csv", "x,y,kind\n1,2,cat\n3,4,dog\n5,6,cat\n");
  const Dataset ds = load_csv(p, std::string("kind"), TaskKind::classification);
  EXPECT_EQ(*ds.labels, (std::vector<ClassLabel>{0, 1, 0}));
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"cat", "dog"}));
}

TEST(LoadCsv, HeaderDetectionAndLabelIndex) {
  TempDir dir;
  const auto p = dir.write("a.csv", "label,f1,f2\n1,0.5,0.25\n0,1.5,2.5\n");
  const Dataset ds = load_csv(p, 0L, TaskKind::classification);
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_DOUBLE_EQ((*ds.values)(1, 1), 2.5);
  EXPECT_EQ((*ds.labels)[0], 1u);
}

TEST(LoadCsv, FormattingEquivalentFilesShareFingerprint) {
  TempDir dir;
  const auto a = dir.write("a.csv", "1.0,2,3.5\n4,5e0,1.25\n");
  const auto b = dir.write("b.csv", "1,2.000,3.5\r\n\n4.0 , 5 ,1.250\n");
  EXPECT_EQ(load_csv(a, -1L, TaskKind::regression).fingerprint,
            load_csv(b, -1L, TaskKind::regression).fingerprint);
}

TEST(LoadCsv, ErrorsNameLocation) {
  TempDir dir;
  const auto ragged = dir.write("r.csv", "1,2,0\n3,0\n");
  EXPECT_NE(error_of([&] { load_csv(ragged, -1L, TaskKind::classification); }).find("line 2"), std::string::npos);
  const auto bad = dir.write("b.csv", "1,2,0\n3,zz,1\n");
  const auto msg = error_of([&] { load_csv(bad, -1L, TaskKind::classification); });
  EXPECT_NE(msg.find("line 2"), std::string::npos);
  EXPECT_NE(msg.find("column 2"), std::string::npos);
  const auto empty = dir.write("e.csv", "\n\n");
  EXPECT_NE(error_of([&] { load_csv(empty, -1L, TaskKind::classification); }).find("empty"), std::string::npos);
  EXPECT_THROW(load_csv(dir.file("missing.csv"), -1L, TaskKind::classification), DataError);
  const auto target = dir.write("t.csv", "1,abc\n");
  EXPECT_THROW(load_csv(target, -1L, TaskKind::regression), DataError);
}

TEST(LoadCsv, GzipInput) {
  TempDir dir;
  const auto p = dir.file("a.csv.gz");
  gzFile gz = gzopen(p.c_str(), "wb");
  ASSERT_NE(gz, nullptr);
  const std::string body = "1,2,0\n3,4,1\n";
  gzwrite(gz, body.data(), static_cast<unsigned>(body.size()));
  gzclose(gz);
  const Dataset ds = load_csv(p, -1L, TaskKind::classification);
  EXPECT_EQ(ds.size(), 2u);
  const auto plain = dir.write("a.csv", body);
  EXPECT_EQ(ds.fingerprint, load_csv(plain, -1L, TaskKind::classification).fingerprint);
}

TEST(LoadCsv, SaveReloadKeepsFingerprint) {
  TempDir dir;
  const auto p = dir.write("a.csv", "0.1,0.2,a\n0.3,1e-7,b\n-0.0,3,a\n");
  const Dataset ds = load_csv(p, -1L, TaskKind::classification);
  const auto out = dir.file("b.csv");
  save_csv(ds, out);
  EXPECT_EQ(load_csv(out, -1L, TaskKind::classification).fingerprint, ds.fingerprint);
}

TEST(LoadCsv, BostonHousingShape) {
  const Dataset ds = load_csv(std::string(COMPRF_DATA_DIR) + "/boston_housing.csv", -1L, TaskKind::regression);
  EXPECT_EQ(ds.size(), 506u);
  EXPECT_EQ(ds.dimension(), 13u);
}

TEST(LoadLibsvm, DensifiesSparseRows) {
  TempDir dir;
  const auto p = dir.write("a.svm", "1 1:0.5 3:2.0\n0\n# comment\n1 2:1\n");
  const Dataset ds = load_libsvm(p, TaskKind::classification);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.dimension(), 3u);
  EXPECT_DOUBLE_EQ((*ds.values)(0, 0), 0.5);
  EXPECT_DOUBLE_EQ((*ds.values)(0, 1), 0.0);
  EXPECT_DOUBLE_EQ((*ds.values)(0, 2), 2.0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ((*ds.values)(1, c), 0.0);
}

TEST(LoadLibsvm, MaxIndexSetsDimension) {
  TempDir dir;
  const auto p = dir.write("a.svm", "-1 5000:1\n1 1:1\n");
  const Dataset ds = load_libsvm(p, TaskKind::classification);
  EXPECT_EQ(ds.dimension(), 5000u);
  EXPECT_EQ(ds.class_count, 2u);
}

TEST(LoadLibsvm, Errors) {
  TempDir dir;
  EXPECT_THROW(load_libsvm(dir.write("a", "1 3:1 2:1\n"), TaskKind::classification), DataError);
  EXPECT_THROW(load_libsvm(dir.write("b", "1 3:1 3:1\n"), TaskKind::classification), DataError);
  EXPECT_THROW(load_libsvm(dir.write("c", "1 x:1\n"), TaskKind::classification), DataError);
  EXPECT_THROW(load_libsvm(dir.write("d", "1 0:1\n"), TaskKind::classification), DataError);
  EXPECT_THROW(load_libsvm(dir.write("e", "1 4\n"), TaskKind::classification), DataError);
}

TEST(MatrixFiles, BinaryAndCsvRoundTrip) {
  TempDir dir;
  Matrix m(3, 3);
  m(0, 1) = m(1, 0) = 0.1;
  m(0, 2) = m(2, 0) = 1.0 / 3.0;
  m(1, 2) = m(2, 1) = 7.25;
  save_matrix_binary(m, dir.file("d.bin"));
  EXPECT_EQ(load_matrix(dir.file("d.bin")), m);
  save_matrix_csv(m, dir.file("d.csv"));
  EXPECT_EQ(load_matrix(dir.file("d.csv")), m);
}

TEST(MatrixFiles, PairwiseDatasetValidates) {
  TempDir dir;
  const auto labels = dir.write("y.txt", "0\n1\n");
  const auto bad = dir.write("d.csv", "0,1\n2,0\n");
  EXPECT_THROW(load_pairwise(bad, labels, Representation::distances, TaskKind::classification), DataError);
  const auto good = dir.write("g.csv", "0,1\n1,0\n");
  const Dataset ds = load_pairwise(good, labels, Representation::distances, TaskKind::classification);
  EXPECT_EQ(ds.size(), 2u);
  const auto short_labels = dir.write("s.txt", "0\n");
  EXPECT_THROW(load_pairwise(good, short_labels, Representation::distances, TaskKind::classification), DataError);
}
