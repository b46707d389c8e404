#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "tsmi/config.hpp"
#include "tsmi/errors.hpp"

using namespace tsmi;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "seed": 7,
  "data": {"suite_count_per_family": 1, "suite_length": 256, "context_len": 48,
           "pred_len": 12, "stride": 8, "max_windows_per_series": 8,
           "holdout_fraction": 0.25},
  "tokenizer": {"n_bins": 16},
  "model": {"n_encoder_blocks": 2, "n_decoder_blocks": 2, "d_model": 8,
            "n_heads": 2, "d_ff": 16, "train_steps": 10, "train_batch": 4},
  "sites": ["enc0", "enc1", "dec0", "cross0"],
  "sae": {"expansion_factor": 4, "k": 4, "steps": 20, "batch": 8},
  "taxonomy": {"r_threshold": 0.5, "site": "enc1"},
  "ablation": {"site": "enc0", "n_windows": 8, "n_samples": 2, "n_features": 16,
               "single_top": 4, "checkpoints": [1, 2, 4, 8]}
})";

}  // namespace

TEST_CASE("empty JSON object yields defaults with derived fields filled in") {
    const ExperimentConfig c = parse_config("{}");
    CHECK(c.seed == 1);
    CHECK(c.model.vocab == c.tokenizer.vocab_size());
    CHECK(c.model.max_context ==
          std::max(c.data.context_len, c.data.pred_len + 1));
    CHECK(c.model.seed == c.seed);
    CHECK(c.sae.seed == c.seed);
    CHECK(c.sae.d_sae == c.sae_expansion_factor * c.model.d_model);
    // An unset progressive list defaults to the single-ablation site.
    REQUIRE(c.ablation.progressive_sites.size() == 1);
    CHECK(c.ablation.progressive_sites[0] == c.ablation.site);
}

TEST_CASE("explicit fields survive a parse/serialize round trip") {
    const ExperimentConfig c = parse_config(kSmallConfig);
    CHECK(c.seed == 7);
    CHECK(c.data.suite_length == 256);
    CHECK(c.data.context_len == 48);
    CHECK(c.data.holdout_fraction == 0.25);
    CHECK(c.tokenizer.n_bins == 16);
    CHECK(c.model.vocab == 18);  // n_bins + 2 specials
    CHECK(c.model.d_model == 8);
    CHECK(c.model.max_context == 48);
    CHECK(c.model_train.train_steps == 10);
    CHECK(c.sites == std::vector<std::string>{"enc0", "enc1", "dec0", "cross0"});
    CHECK(c.sae.d_sae == 32);
    CHECK(c.sae.k == 4);
    CHECK(c.taxonomy.site == "enc1");
    CHECK(c.ablation.checkpoints == std::vector<std::size_t>{1, 2, 4, 8});
    REQUIRE(c.ablation.progressive_sites.size() == 1);
    CHECK(c.ablation.progressive_sites[0] == "enc0");

    const std::string text = serialize_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(serialize_config(back) == text);  // canonical fixed point
    CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("config hash is stable and sensitive to every serialized field") {
    const ExperimentConfig a = parse_config(kSmallConfig);
    CHECK(config_hash(a) == config_hash(parse_config(kSmallConfig)));

    ExperimentConfig b = a;
    b.seed = 8;
    CHECK(config_hash(b) != config_hash(a));

    ExperimentConfig d = a;
    d.ablation.checkpoints.push_back(16);
    CHECK(config_hash(d) != config_hash(a));

    ExperimentConfig e = a;
    e.taxonomy.r_threshold = 0.6;
    CHECK(config_hash(e) != config_hash(a));
}

TEST_CASE("malformed input is rejected as ConfigError") {
    CHECK_THROWS_AS(parse_config("not json at all"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"seed\": \"high\"}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"sites\": 12}"), ConfigError);
    try {
        parse_config("[1,2,3]");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("JSON") != std::string::npos);
    }
}

TEST_CASE("load_config reads a file and names it when missing") {
    const fs::path dir = fs::temp_directory_path() / "tsmi_config_test";
    fs::create_directories(dir);
    const fs::path path = dir / "cfg.json";
    {
        std::ofstream out(path);
        out << kSmallConfig;
    }
    const ExperimentConfig c = load_config(path.string());
    CHECK(c.seed == 7);
    fs::remove_all(dir);

    try {
        load_config((dir / "gone.json").string());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("gone.json") != std::string::npos);
    }
}

TEST_CASE("a well-formed small config validates cleanly") {
    CHECK_NOTHROW(parse_config(kSmallConfig).validate());
}

TEST_CASE("validation reports every violation in one error") {
    ExperimentConfig c = parse_config(kSmallConfig);
    c.data.suite_length = 100;       // too short, and context+pred no longer fit
    c.data.holdout_fraction = 1.5;   // out of [0, 1)
    c.taxonomy.r_threshold = 2.0;    // out of [0, 1]
    c.sites = {"enc9", "bogus"};     // out of range + unrecognized
    c.sae.d_sae = 7;                 // breaks expansion-factor identity and k <= d_sae is fine
    c.ablation.single_top = 0;
    c.ablation.n_features = 1000;    // exceeds d_sae
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("suite_length") != std::string::npos);
        CHECK(msg.find("holdout_fraction") != std::string::npos);
        CHECK(msg.find("r_threshold") != std::string::npos);
        CHECK(msg.find("enc9") != std::string::npos);
        CHECK(msg.find("bogus") != std::string::npos);
        CHECK(msg.find("expansion_factor") != std::string::npos);
        CHECK(msg.find("single_top") != std::string::npos);
        CHECK(msg.find("n_features") != std::string::npos);
    }
}

TEST_CASE("validation catches cross-module mismatches") {
    SUBCASE("vocab drifts from the tokenizer") {
        ExperimentConfig c = parse_config(kSmallConfig);
        c.model.vocab = 99;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("max_context too small for the windows") {
        ExperimentConfig c = parse_config(kSmallConfig);
        c.model.max_context = 8;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("no sites at all") {
        ExperimentConfig c = parse_config(kSmallConfig);
        c.sites.clear();
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("descending checkpoints") {
        ExperimentConfig c = parse_config(kSmallConfig);
        c.ablation.checkpoints = {4, 2};
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
}
