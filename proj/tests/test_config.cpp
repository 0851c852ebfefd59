#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fullmatch/config.hpp"

using namespace fullmatch;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.threshold == 0.95);
  CHECK(c.alpha == 1.0);
  CHECK(c.beta == 1.0);
  CHECK(c.lr == 0.03);
  CHECK(c.momentum == 0.9);
  CHECK(c.weight_decay == 5e-4);
  CHECK(c.unlabeled_ratio == 7);
  CHECK(c.unlabeled_batch() == 7 * c.labeled_batch);
  CHECK(c.eval_interval == 250);
  CHECK(c.method == Method::fullmatch);
  CHECK(c.anl_scope == NegativeScope::all);
  CHECK(c.eml_variant == EmlVariant::bce);
  CHECK(c.layer_dims() == std::vector<std::size_t>{2, 64, 64, 4});
  CHECK(parse_config("") == c);
}

TEST_CASE("shipped default config equals the built-in defaults") {
  std::ifstream in(FULLMATCH_SOURCE_DIR "/configs/default.conf");
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(parse_config(ss.str()) == ExperimentConfig{});
}

TEST_CASE("parsing") {
  const auto c = parse_config(
      "# comment\n"
      "method = fixmatch+anl   # trailing comment\n"
      "anl_scope = with_pl\n"
      "  alpha=2\n"
      "model.hidden = 16, 8, 4\n"
      "augment.strong_noise_sigma = 0.5\n"
      "data.kind = two_moons\n"
      "data.classes = 2\n");
  CHECK(c.method == Method::fixmatch_anl);
  CHECK(c.anl_scope == NegativeScope::with_pseudo_label);
  CHECK(c.alpha == 2.0);
  CHECK(c.hidden == std::vector<std::size_t>{16, 8, 4});
  CHECK(c.augment.strong_noise_sigma == 0.5);
  CHECK(c.data.kind == DatasetKind::two_moons);
}

TEST_CASE("round trip through canonical text") {
  ExperimentConfig c;
  c.method = Method::fixmatch_eml;
  c.eml_variant = EmlVariant::ce;
  c.alpha = 0.5;
  c.test_fraction = 0.2;
  c.hidden = {32};
  const auto text = to_text(c);
  CHECK(parse_config(text) == c);
  CHECK(to_text(parse_config(text)) == text);
  for (const auto& key : config_keys()) CHECK(text.find(key + " = ") != std::string::npos);
}

TEST_CASE("errors name the offending key") {
  CHECK(error_key("bogus = 1\n") == "bogus");
  CHECK(error_key("alpha = 1\nalpha = 2\n") == "alpha");
  CHECK(error_key("threshold = 0.5\n") == "threshold");
  CHECK(error_key("threshold = 1\n") == "threshold");
  CHECK(error_key("alpha = -1\n") == "alpha");
  CHECK(error_key("lr = abc\n") == "lr");
  CHECK(error_key("method = meanteacher\n") == "method");
  CHECK(error_key("augment.weak_noise_sigma = 0.5\n") == "augment.weak_noise_sigma");
  CHECK(error_key("augment.strong_dropout_fraction = 1\n") == "augment.strong_dropout_fraction");
  CHECK(error_key("data.kind = two_moons\n") == "data.classes");
  CHECK(error_key("data.labels_per_class = 600\n") == "data.labels_per_class");
  CHECK(error_key("labeled_batch = 0\n") == "labeled_batch");
  CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/fullmatch.conf"), ConfigError);
}

TEST_CASE("method switches") {
  CHECK_FALSE(uses_eml(Method::fixmatch));
  CHECK_FALSE(uses_anl(Method::fixmatch));
  CHECK(uses_eml(Method::fixmatch_eml));
  CHECK_FALSE(uses_anl(Method::fixmatch_eml));
  CHECK(uses_anl(Method::fixmatch_anl));
  CHECK(uses_eml(Method::fullmatch));
  CHECK(uses_anl(Method::fullmatch));
  for (auto m : {Method::fixmatch, Method::fixmatch_eml, Method::fixmatch_anl, Method::fullmatch}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  for (auto s : {NegativeScope::all, NegativeScope::with_pseudo_label, NegativeScope::without_pseudo_label}) {
    CHECK(parse_negative_scope(to_string(s)) == s);
  }
  CHECK(parse_eml_variant("ce") == EmlVariant::ce);
}

TEST_CASE("zero iterations is accepted") {
  CHECK(parse_config("iterations = 0\n").iterations == 0);
}
