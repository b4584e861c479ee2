/*
 * Copyright 2026 The editmine Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "editmine/augment.hpp"

#include <gtest/gtest.h>

#include <set>

#include "editmine/sim_backend.hpp"
#include "test_support.hpp"

using namespace editmine;
using testing_support::ScriptedTransport;
using testing_support::TempDir;
using testing_support::text_response;

namespace {

struct Rig {
  TempDir dir{"augment"};
  BlobStore store{dir.path()};
  ImageRef source = store.put(testing_support::solid(64, 64, 100, 100, 100));

  TripletRecord forward(const std::string& instruction, std::uint8_t shade, std::size_t edit_index,
                        const ImageRef* src = nullptr) {
    TripletRecord r;
    r.source_image = src ? *src : source;
    r.edited_image = store.put(testing_support::solid(64, 64, shade, 0, 0));
    r.instruction = instruction;
    r.record_id = "fwd-" + std::to_string(edit_index) + "-" + r.source_image.image_id.substr(0, 6);
    r.hard_scores = ScorePair{4.9, 4.9, std::nullopt};
    r.bundle_id = "bundle";
    r.edit_index = edit_index;
    r.t2i_seed = 1;
    r.edit_seed = 2 + edit_index;
    r.t2i_prompt = "a kitchen with a red kettle, a bowl of lemons and a wall clock";
    return r;
  }
};

ModelGateway sim_gateway(BlobStore& store, SimOptions o) {
  return ModelGateway::uniform(std::make_shared<InProcessTransport>(std::make_shared<SimBackend>(o)), store);
}

std::size_t count_kind(const Dataset& ds, DerivationKind k) {
  std::size_t n = 0;
  for (const auto& r : ds) n += r.derivation.kind == k;
  return n;
}

}  // namespace

TEST(Compose, InverseThenForwardWithSentenceBreak) {
  EXPECT_EQ(compose_instruction("Add the red kettle to the stove", "Remove the bowl of lemons."),
            "Add the red kettle to the stove. Remove the bowl of lemons.");
  EXPECT_EQ(compose_instruction(" Add the kettle. ", "Remove the clock."), "Add the kettle. Remove the clock.");
}

TEST(Inversion, SwapsImagesAndUsesPromptAsDescription) {
  Rig rig;
  std::string seen_description;
  auto t = std::make_shared<ScriptedTransport>([&](const std::string&, const nlohmann::json& req) {
    seen_description = req.at("original_description");
    return text_response("Put the red kettle back on the stove.");
  });
  auto gw = ModelGateway::uniform(t, rig.store);
  Dataset ds{rig.forward("Take the red kettle off the stove.", 10, 0)};
  AugmentStats st;
  // "back" is banned, so this reply is a refusal.
  EXPECT_TRUE(apply_inversions(ds, gw, st).empty());
  EXPECT_EQ(st.inversion_refused, 1u);

  auto t2 = std::make_shared<ScriptedTransport>([&](const std::string&, const nlohmann::json& req) {
    seen_description = req.at("original_description");
    return text_response("Place the red kettle on the stove.");
  });
  auto gw2 = ModelGateway::uniform(t2, rig.store);
  const auto inv = apply_inversions(ds, gw2, st);
  ASSERT_EQ(inv.size(), 1u);
  EXPECT_EQ(seen_description, ds[0].t2i_prompt);
  EXPECT_EQ(inv[0].instruction, "Place the red kettle on the stove.");
  EXPECT_EQ(inv[0].source_image, ds[0].edited_image);
  EXPECT_EQ(inv[0].edited_image, ds[0].source_image);
  EXPECT_EQ(inv[0].derivation.kind, DerivationKind::Inverted);
  EXPECT_EQ(inv[0].derivation.parent_ids, std::vector<std::string>{ds[0].record_id});
  EXPECT_EQ(inv[0].record_id, inverted_record_id(ds[0].record_id));
  EXPECT_FALSE(inv[0].hard_scores);
  EXPECT_NO_THROW(validate_record(inv[0]));

  // Already inverted records are not inverted again.
  Dataset both = ds;
  both.push_back(inv[0]);
  EXPECT_TRUE(apply_inversions(both, gw2, st).empty());
}

TEST(Inversion, AllPassGivesOneInversePerForward) {
  Rig rig;
  SimOptions o;
  o.forced_score = 5.0;
  auto gw = sim_gateway(rig.store, o);
  Dataset ds;
  for (int i = 0; i < 5; ++i) ds.push_back(rig.forward("Remove item " + std::to_string(i) + ".", 20 + i, i));
  AugmentStats st;
  const auto inv = apply_inversions(ds, gw, st, 3);
  EXPECT_EQ(inv.size(), ds.size());
  EXPECT_EQ(inv[2].instruction, "Add item 2.");
}

TEST(Bootstrap, SingleEditSourceGivesNothing) {
  Rig rig;
  Dataset ds{rig.forward("Remove the clock.", 10, 0)};
  AugmentStats st;
  AugmentConfig cfg;
  cfg.max_compositions_per_source = 0;
  EXPECT_TRUE(apply_bootstraps(ds, cfg, st).empty());
}

TEST(Bootstrap, ThreeEditsUnlimitedCapGivesSixOrderedPairs) {
  Rig rig;
  Dataset ds{rig.forward("Remove the kettle.", 10, 0), rig.forward("Remove the lemons.", 20, 1),
             rig.forward("Remove the clock.", 30, 2)};
  const std::vector<std::string> inverse = {"Add the kettle.", "Add the lemons.", "Add the clock."};
  for (int i = 0; i < 3; ++i) {
    TripletRecord inv;
    inv.record_id = inverted_record_id(ds[i].record_id);
    inv.source_image = ds[i].edited_image;
    inv.edited_image = ds[i].source_image;
    inv.instruction = inverse[i];
    inv.derivation = {DerivationKind::Inverted, {ds[i].record_id}};
    ds.push_back(inv);
  }
  AugmentConfig cfg;
  cfg.max_compositions_per_source = 0;
  AugmentStats st;
  const auto comp = apply_bootstraps(ds, cfg, st);
  ASSERT_EQ(comp.size(), 6u);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& c : comp) {
    ASSERT_EQ(c.derivation.parent_ids.size(), 2u);
    pairs.insert({c.derivation.parent_ids[0], c.derivation.parent_ids[1]});
    EXPECT_NO_THROW(validate_record(c));
  }
  EXPECT_EQ(pairs.size(), 6u);
  // (kettle, lemons): from the kettle-removed image to the lemons-removed image.
  const auto& first = comp[0];
  EXPECT_EQ(first.derivation.parent_ids[0], ds[0].record_id);
  EXPECT_EQ(first.derivation.parent_ids[1], ds[1].record_id);
  EXPECT_EQ(first.instruction, "Add the kettle. Remove the lemons.");
  EXPECT_EQ(first.source_image, ds[0].edited_image);
  EXPECT_EQ(first.edited_image, ds[1].edited_image);

  // Default cap of one pair per source, reproducible by seed.
  cfg.max_compositions_per_source = 1;
  AugmentStats st2;
  const auto one = apply_bootstraps(ds, cfg, st2);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(apply_bootstraps(ds, cfg, st2)[0].record_id, one[0].record_id);

  // Rerunning over a dataset that already holds the compositions adds nothing.
  Dataset with = ds;
  with.insert(with.end(), comp.begin(), comp.end());
  cfg.max_compositions_per_source = 0;
  EXPECT_TRUE(apply_bootstraps(with, cfg, st2).empty());
}

TEST(Bootstrap, PairsWithoutInverseAreSkipped) {
  Rig rig;
  Dataset ds{rig.forward("Remove the kettle.", 10, 0), rig.forward("Remove the lemons.", 20, 1)};
  AugmentConfig cfg;
  cfg.max_compositions_per_source = 0;
  AugmentStats st;
  EXPECT_TRUE(apply_bootstraps(ds, cfg, st).empty());
}

TEST(Bootstrap, RewriteUsesGatewayAndCountsFailures) {
  Rig rig;
  auto gw = sim_gateway(rig.store, SimOptions{});
  Dataset ds{rig.forward("Remove the kettle.", 10, 0), rig.forward("Remove the lemons.", 20, 1)};
  AugmentStats st;
  for (auto& inv : apply_inversions(ds, gw, st)) ds.push_back(inv);
  AugmentConfig cfg;
  cfg.max_compositions_per_source = 0;
  cfg.rewrite_composites = true;
  const auto comp = apply_bootstraps(ds, cfg, st, &gw);
  ASSERT_EQ(comp.size(), 2u);
  for (const auto& c : comp) EXPECT_EQ(c.instruction.find(". "), std::string::npos) << c.instruction;
  EXPECT_THROW(apply_bootstraps(ds, cfg, st, nullptr), std::invalid_argument);
}

TEST(BackwardFilter, FailingInversionRemovesParentAndDependentCompositions) {
  Rig rig;
  // Inverse instructions mentioning the kettle score low.
  auto t = std::make_shared<ScriptedTransport>([](const std::string& path, const nlohmann::json& req) {
    if (path == "/invert") {
      const auto ins = req.at("instruction").get<std::string>();
      return text_response("Add" + ins.substr(ins.find(' ')));
    }
    const auto ins = req.at("instruction").get<std::string>();
    if (ins.find("kettle") != std::string::npos) {
      return text_response(R"({"InstructionAdherence": 4.1, "ImageAesthetic": 4.9})");
    }
    return text_response(R"({"InstructionAdherence": 4.8, "ImageAesthetic": 4.9})");
  });
  auto gw = ModelGateway::uniform(t, rig.store);
  Dataset ds{rig.forward("Remove the kettle.", 10, 0), rig.forward("Remove the lemons.", 20, 1),
             rig.forward("Remove the clock.", 30, 2)};
  AugmentStats st;
  for (auto& r : apply_inversions(ds, gw, st)) ds.push_back(r);
  AugmentConfig cfg;
  cfg.max_compositions_per_source = 0;
  for (auto& r : apply_bootstraps(ds, cfg, st)) ds.push_back(r);
  ASSERT_EQ(ds.size(), 12u);

  const auto out = backward_consistency_filter(ds, gw, 4.7, 4.7, st);
  // Removed: the kettle inversion, its forward parent and the 4 compositions using it.
  EXPECT_EQ(ds.size() - out.size(), 6u);
  EXPECT_EQ(st.removed_records, 6u);
  EXPECT_EQ(st.backward_rejected, 1u);
  EXPECT_EQ(st.backward_scored, 3u);
  std::set<std::string> ids;
  for (const auto& r : out) ids.insert(r.record_id);
  EXPECT_FALSE(ids.count(ds[0].record_id));
  EXPECT_FALSE(ids.count(inverted_record_id(ds[0].record_id)));
  EXPECT_TRUE(ids.count(ds[1].record_id));
  EXPECT_EQ(count_kind(out, DerivationKind::Composed), 2u);
  for (const auto& r : out) {
    if (r.derivation.kind == DerivationKind::Inverted) {
      ASSERT_TRUE(r.hard_scores);
      EXPECT_DOUBLE_EQ(r.hard_scores->adherence, 4.8);
    }
  }
}

TEST(BackwardFilter, UnscorableInversionCountsAsFailure) {
  Rig rig;
  auto t = std::make_shared<ScriptedTransport>([](const std::string& path, const nlohmann::json&) {
    if (path == "/invert") return text_response("Add the kettle.");
    return text_response("I am not sure.");
  });
  auto gw = ModelGateway::uniform(t, rig.store);
  Dataset ds{rig.forward("Remove the kettle.", 10, 0)};
  AugmentStats st;
  for (auto& r : apply_inversions(ds, gw, st)) ds.push_back(r);
  EXPECT_TRUE(backward_consistency_filter(ds, gw, 4.7, 4.7, st).empty());
  EXPECT_EQ(st.backward_unavailable, 1u);
}

TEST(BackwardFilter, AllPassAndEmpty) {
  Rig rig;
  SimOptions o;
  o.forced_score = 5.0;
  auto gw = sim_gateway(rig.store, o);
  Dataset ds{rig.forward("Remove the kettle.", 10, 0), rig.forward("Remove the lemons.", 20, 1)};
  AugmentStats st;
  for (auto& r : apply_inversions(ds, gw, st)) ds.push_back(r);
  const auto out = backward_consistency_filter(ds, gw, 4.7, 4.7, st);
  ASSERT_EQ(out.size(), ds.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].record_id, ds[i].record_id);
  EXPECT_TRUE(backward_consistency_filter({}, gw, 4.7, 4.7, st).empty());
}

TEST(RemoveWithDescendants, CascadesRegardlessOfOrder) {
  TripletRecord a, b, c, d;
  a.record_id = "a";
  b.record_id = "b";
  c.record_id = "c";
  c.derivation = {DerivationKind::Composed, {"a", "b"}};
  d.record_id = "d";
  d.derivation = {DerivationKind::Inverted, {"c"}};
  const auto out = remove_with_descendants({d, c, b, a}, {"a"});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].record_id, "b");
}

TEST(AugmentDataset, AllPassDoublesForwardCount) {
  Rig rig;
  SimOptions o;
  o.forced_score = 5.0;
  auto gw = sim_gateway(rig.store, o);
  const auto other = rig.store.put(testing_support::solid(64, 64, 7, 7, 7));
  Dataset ds{rig.forward("Remove the kettle.", 10, 0), rig.forward("Remove the lemons.", 20, 1),
             rig.forward("Remove the clock.", 30, 0, &other)};
  AugmentConfig cfg;
  AugmentStats st;
  const auto out = augment_dataset(ds, gw, cfg, st);
  EXPECT_EQ(count_kind(out, DerivationKind::Forward), 3u);
  EXPECT_EQ(count_kind(out, DerivationKind::Inverted), 3u);
  EXPECT_EQ(count_kind(out, DerivationKind::Composed), 1u);
  EXPECT_EQ(st.removed_records, 0u);
}

TEST(AugmentConfigValidation, Rejects) {
  EXPECT_THROW(validate(AugmentConfig{.max_compositions_per_source = -1}), ValidationError);
  EXPECT_THROW(validate(AugmentConfig{.t_inv_aes = 0.5}), ValidationError);
  EXPECT_THROW(validate(AugmentConfig{.max_parallel = 0}), ValidationError);
}
