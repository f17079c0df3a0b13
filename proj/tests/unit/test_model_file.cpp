#include "evergreen/error.hpp"
#include "evergreen/model_file.hpp"
#include "evergreen/pipeline.hpp"
#include "evergreen/plots.hpp"

#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace evergreen;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("evergreen_model_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PipelineConfig small_config() {
    PipelineConfig config;
    config.seed = 3;
    config.selection_k = {1, 2, 3, 4};
    config.sweep_k = {2, 3, 4};
    config.restarts = 4;
    config.eval_grid = 128;
    return config;
}

class ModelFileTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        corpus_ = new Corpus(testkit::small_corpus(300, 41));
        model_ = new ModelFile(run_pipeline(small_config(), *corpus_));
    }
    static void TearDownTestSuite() {
        delete model_;
        delete corpus_;
    }
    static Corpus* corpus_;
    static ModelFile* model_;
};

Corpus* ModelFileTest::corpus_ = nullptr;
ModelFile* ModelFileTest::model_ = nullptr;

}  // namespace

TEST_F(ModelFileTest, AllStagesPresent) {
    EXPECT_TRUE(model_->ingest && model_->fit && model_->baseline && model_->cluster && model_->label &&
                model_->sensitivity);
    EXPECT_EQ(model_->fit->basis.k(), 4);
    EXPECT_EQ(model_->fit->fits.size(), 300u);
    EXPECT_EQ(model_->sensitivity->sweep.cells.size(), 9u);
    EXPECT_EQ(model_->sensitivity->thresholds.size(), 2u);
}

TEST_F(ModelFileTest, SaveLoadSaveIsByteIdentical) {
    const auto dir = scratch("roundtrip");
    save_model((dir / "a.json").string(), *model_);
    const ModelFile loaded = load_model((dir / "a.json").string());
    save_model((dir / "b.json").string(), loaded);
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
    EXPECT_EQ(serialize_model(loaded), serialize_model(*model_));
}

TEST_F(ModelFileTest, TruncatedOrTamperedFileFailsChecksum) {
    const auto dir = scratch("truncated");
    save_model((dir / "m.json").string(), *model_);
    const std::string text = slurp(dir / "m.json");
    {
        std::ofstream out(dir / "cut.json", std::ios::binary);
        out << text.substr(0, text.size() / 2);
    }
    try {
        load_model((dir / "cut.json").string());
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
    }
    std::string tampered = std::regex_replace(text, std::regex("\"m_wsb\": 30\\.0"), "\"m_wsb\": 31.0");
    ASSERT_NE(tampered, text);
    {
        std::ofstream out(dir / "tampered.json", std::ios::binary);
        out << tampered;
    }
    EXPECT_THROW(load_model((dir / "tampered.json").string()), DataError);
}

TEST_F(ModelFileTest, SchemaVersionChecked) {
    ModelFile copy = *model_;
    copy.schema_version = kSchemaVersion + 1;
    const auto dir = scratch("schema");
    save_model((dir / "m.json").string(), copy);
    try {
        load_model((dir / "m.json").string());
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("schema"), std::string::npos);
    }
}

TEST_F(ModelFileTest, PlotsFromLoadedCopyMatchOriginal) {
    const auto dir = scratch("plots");
    save_model((dir / "m.json").string(), *model_);
    const ModelFile loaded = load_model((dir / "m.json").string());
    const std::vector<std::string> all(kPlotIds.begin(), kPlotIds.end());
    fs::create_directories(dir / "a");
    fs::create_directories(dir / "b");
    const auto a = emit_plots(*model_, all, (dir / "a").string());
    const auto b = emit_plots(loaded, all, (dir / "b").string());
    ASSERT_EQ(a.size(), b.size());
    ASSERT_GE(a.size(), 2 * kPlotIds.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(fs::path(a[i]).filename(), fs::path(b[i]).filename());
        EXPECT_EQ(slurp(a[i]), slurp(b[i])) << a[i];
    }
}

TEST_F(ModelFileTest, PlotShapes) {
    const auto dir = scratch("shapes");
    const std::vector<std::string> which{"eigenfunctions", "gof_scatter", "cluster_curves"};
    emit_plots(*model_, which, dir.string());

    std::ifstream eig(dir / "eigenfunctions.csv");
    std::string line;
    std::getline(eig, line);
    EXPECT_EQ(line, "t,phi1,phi2,phi3,phi4");
    int rows = 0;
    while (std::getline(eig, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    }
    EXPECT_EQ(rows, 30);

    std::ifstream gof(dir / "gof_scatter.csv");
    std::getline(gof, line);
    EXPECT_EQ(line, "id,log10_mse_wsb,log10_mse_fpca");

    const std::string svg = slurp(dir / "cluster_curves.svg");
    std::size_t polylines = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1))
        ++polylines;
    EXPECT_EQ(polylines, static_cast<std::size_t>(model_->cluster->k));
}

TEST_F(ModelFileTest, MissingStageIsNamed) {
    ModelFile partial = *model_;
    partial.baseline.reset();
    const std::vector<std::string> which{"gof_kde"};
    try {
        emit_plots(partial, which, scratch("missing").string());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("baseline"), std::string::npos);
    }
    const std::vector<std::string> unknown{"nope"};
    EXPECT_THROW(emit_plots(*model_, unknown, scratch("unknown").string()), ConfigError);

    ModelFile bare = *model_;
    bare.fit.reset();
    try {
        cluster_stage(bare);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("fit"), std::string::npos);
    }
}

TEST_F(ModelFileTest, DeterministicAcrossThreadCounts) {
    PipelineConfig config = small_config();
    config.threads = 3;
    ModelFile other = run_pipeline(config, *corpus_);
    other.created = model_->created;
    // The thread count is not part of the stored config.
    EXPECT_EQ(serialize_model(other), serialize_model(*model_));
}

TEST_F(ModelFileTest, SingleThresholdMatchesMainClustering) {
    PipelineConfig config = small_config();
    config.thresholds = {0};
    const ModelFile m = run_pipeline(config, *corpus_);
    ASSERT_EQ(m.sensitivity->thresholds.size(), 1u);
    const auto& run = m.sensitivity->thresholds[0];
    EXPECT_EQ(run.assignments, m.cluster->assignments);
    EXPECT_EQ(run.labels, m.cluster->labels);
    EXPECT_EQ(run.ari_vs_base, 1.0);
}

TEST(ZeroBasis, IntensityIsMeanAndClusteringRefused) {
    PipelineConfig config = small_config();
    config.k_basis = 0;
    const Corpus corpus = testkit::small_corpus(60, 2);
    ModelFile model = ingest_stage(config, corpus);
    fit_stage(model);
    for (const auto& fit : model.fit->fits)
        for (std::size_t j = 0; j < 30; ++j) EXPECT_DOUBLE_EQ(fit.intensity[j], std::exp(model.fit->basis.mean[j]));
    try {
        cluster_stage(model);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("zero-dimensional"), std::string::npos);
    }
    EXPECT_THROW(run_pipeline(config, corpus), ConfigError);
}

TEST(Checksum, KnownDigest) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
