#include "posekit/coco_io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "coco_fuzz.hpp"
#include "json.hpp"
#include "posekit/rng.hpp"

using namespace posekit;
using nlohmann::json;

namespace {

std::string write_text_file(const std::string& tag, const std::string& text) {
  const std::string path = std::string(::testing::TempDir()) + "posekit_coco_" + tag + ".json";
  std::ofstream out(path);
  out << text;
  return path;
}

std::string write_doc(const std::string& tag, const json& doc) {
  return write_text_file(tag, doc.dump(1));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Two images, three annotations (one crowd region), three joints; shared
// with the acceptance fuzz run.
json valid_doc() { return oracles::valid_keypoints_doc(); }

json seventeen_joint_doc() {
  json doc;
  doc["images"] = json::array();
  doc["images"].push_back({{"id", 7}, {"width", 640}, {"height", 480}, {"file_name", "x.jpg"}});
  json cat = {{"id", 1}, {"name", "person"}};
  json names = json::array();
  for (int i = 0; i < 17; ++i) names.push_back("j" + std::to_string(i));
  cat["keypoints"] = names;
  doc["categories"] = json::array({cat});
  json ann = {{"id", 1}, {"image_id", 7}, {"category_id", 1}, {"iscrowd", 0}, {"area", 100.0}};
  json kps = json::array();
  for (int i = 0; i < 17; ++i) {
    kps.push_back(10.0 + i);
    kps.push_back(20.0 + 0.5 * i);
    kps.push_back(2);
  }
  ann["keypoints"] = kps;
  doc["annotations"] = json::array({ann});
  return doc;
}

std::string reader_error(const std::string& path) {
  try {
    read_coco_keypoints(path);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(CocoRead, MinimalSeventeenJointDocYieldsOneSceneOnePose) {
  const std::string path = write_doc("minimal17", seventeen_joint_doc());
  const CocoDataset ds = read_coco_keypoints(path);
  EXPECT_EQ(ds.skeleton.k, 17);
  ASSERT_EQ(ds.skeleton.joint_names.size(), 17u);
  EXPECT_EQ(ds.skeleton.joint_names[0], "j0");
  EXPECT_EQ(ds.skeleton.sigmas, coco_sigmas());
  ASSERT_EQ(ds.images.size(), 1u);
  EXPECT_EQ(ds.images[0].image.id, 7);
  EXPECT_EQ(ds.images[0].image.width, 640);
  EXPECT_EQ(ds.images[0].image.file_name, "x.jpg");
  ASSERT_EQ(ds.images[0].records.size(), 1u);
  const Pose& p = ds.images[0].records[0].pose;
  ASSERT_EQ(p.keypoints.size(), 17u);
  EXPECT_EQ(p.keypoints[3].x, 13.0);
  EXPECT_EQ(p.keypoints[3].y, 21.5);
  EXPECT_EQ(p.keypoints[3].v, 2);
}

TEST(CocoRead, GroupSizesFollowImageIdMultiplicities) {
  const std::string path = write_doc("grouping", valid_doc());
  const CocoDataset ds = read_coco_keypoints(path);
  EXPECT_EQ(ds.skeleton.k, 3);
  ASSERT_EQ(ds.images.size(), 2u);
  ASSERT_EQ(ds.images[0].records.size(), 2u);
  ASSERT_EQ(ds.images[1].records.size(), 1u);
  EXPECT_EQ(ds.images[0].records[0].annotation_id, 10);
  EXPECT_EQ(ds.images[0].records[1].annotation_id, 11);
  EXPECT_EQ(ds.images[1].records[0].annotation_id, 12);
  EXPECT_EQ(ds.images[1].image.height, 48);
  EXPECT_EQ(ds.images[0].records[0].pose.keypoints[1].x, 8.5);
  EXPECT_EQ(ds.images[0].records[0].pose.keypoints[2].v, 1);
  EXPECT_EQ(ds.images[1].records[0].pose.keypoints[2].y, 6.5);
}

TEST(CocoRead, CrowdRegionsAreFlaggedAndLeftOutOfDefaultGt) {
  const std::string path = write_doc("crowd", valid_doc());
  const CocoDataset ds = read_coco_keypoints(path);
  EXPECT_FALSE(ds.images[0].records[0].iscrowd);
  EXPECT_TRUE(ds.images[0].records[1].iscrowd);
  EXPECT_EQ(ds.images[0].gt_poses().size(), 1u);
  EXPECT_EQ(ds.images[1].gt_poses().size(), 1u);
  EXPECT_EQ(ds.images[0].records[0].area, 30.25);
  EXPECT_EQ(ds.images[1].records[0].area, 0.0);
}

TEST(CocoRead, FiftyKeypointNumbersAgainstSeventeenJointsIsLocated) {
  json doc = seventeen_joint_doc();
  json kps = json::array();
  for (int i = 0; i < 50; ++i) kps.push_back(i * 1.0);
  doc["annotations"][0]["keypoints"] = kps;
  const std::string msg = reader_error(write_doc("len50", doc));
  EXPECT_NE(msg.find("keypoints length 50 ≠ 51"), std::string::npos) << msg;
  EXPECT_NE(msg.find("annotations[0]"), std::string::npos) << msg;
}

TEST(CocoRead, DanglingImageIdIsLocated) {
  json doc = valid_doc();
  doc["annotations"][2]["image_id"] = 99;
  const std::string msg = reader_error(write_doc("dangling", doc));
  EXPECT_NE(msg.find("annotations[2]"), std::string::npos) << msg;
  EXPECT_NE(msg.find("image_id 99 does not match any image"), std::string::npos) << msg;
}

TEST(CocoRead, MalformedJsonNamesTheFile) {
  const std::string path = write_text_file("broken", "{ \"images\": [ oops");
  const std::string msg = reader_error(path);
  EXPECT_NE(msg.find("malformed JSON"), std::string::npos) << msg;
  EXPECT_NE(msg.find("posekit_coco_broken"), std::string::npos) << msg;
}

TEST(CocoRead, MissingFileThrows) {
  EXPECT_THROW(read_coco_keypoints("/no/such/file.json"), std::runtime_error);
}

TEST(CocoResults, ReadWriteReadIsTheIdentityOnPosesAndScores) {
  const CocoDataset ds = read_coco_keypoints(write_doc("chain", valid_doc()));
  ResultsPerImage dets;
  int n = 0;
  for (const auto& scene : ds.images) {
    std::vector<Detection> list;
    for (const auto& rec : scene.records) {
      Detection d;
      d.pose = rec.pose;
      d.score = (n + 1) / 7.0;
      ++n;
      list.push_back(d);
    }
    dets.push_back({scene.image.id, list});
  }

  const std::string out1 = std::string(::testing::TempDir()) + "posekit_results_chain1.json";
  write_results(dets, out1);
  const ResultsPerImage back = read_results(out1);
  ASSERT_EQ(back.size(), dets.size());
  for (size_t g = 0; g < dets.size(); ++g) {
    EXPECT_EQ(back[g].first, dets[g].first);
    ASSERT_EQ(back[g].second.size(), dets[g].second.size());
    for (size_t i = 0; i < dets[g].second.size(); ++i) {
      EXPECT_EQ(back[g].second[i].score, dets[g].second[i].score);
      const auto& kin = dets[g].second[i].pose.keypoints;
      const auto& kout = back[g].second[i].pose.keypoints;
      ASSERT_EQ(kin.size(), kout.size());
      for (size_t j = 0; j < kin.size(); ++j) {
        EXPECT_EQ(kout[j].x, kin[j].x);
        EXPECT_EQ(kout[j].y, kin[j].y);
        EXPECT_EQ(kout[j].v, 1);
      }
    }
  }

  // Writing what was read back reproduces the file byte for byte.
  const std::string out2 = std::string(::testing::TempDir()) + "posekit_results_chain2.json";
  write_results(back, out2);
  EXPECT_EQ(read_text(out1), read_text(out2));
}

TEST(CocoResults, HundredRandomDetectionsRoundTripExactly) {
  Rng rng(314);
  ResultsPerImage dets;
  const std::vector<std::int64_t> ids = {3, 1, 7, 2, 11, 40, 5};
  for (std::int64_t id : ids) dets.push_back({id, {}});
  for (int i = 0; i < 100; ++i) {
    Detection d;
    for (int j = 0; j < 5; ++j)
      d.pose.keypoints.push_back({rng.uniform(-50.0, 200.0) / 3.0,
                                  rng.uniform(-50.0, 200.0) / 7.0, 2});
    d.score = rng.uniform();
    dets[i % ids.size()].second.push_back(d);
  }
  const std::string path = std::string(::testing::TempDir()) + "posekit_results_rand.json";
  write_results(dets, path);
  const ResultsPerImage back = read_results(path);
  ASSERT_EQ(back.size(), dets.size());
  for (size_t g = 0; g < dets.size(); ++g) {
    EXPECT_EQ(back[g].first, dets[g].first);
    ASSERT_EQ(back[g].second.size(), dets[g].second.size());
    for (size_t i = 0; i < dets[g].second.size(); ++i) {
      EXPECT_EQ(back[g].second[i].score, dets[g].second[i].score);
      for (size_t j = 0; j < 5; ++j) {
        EXPECT_EQ(back[g].second[i].pose.keypoints[j].x, dets[g].second[i].pose.keypoints[j].x);
        EXPECT_EQ(back[g].second[i].pose.keypoints[j].y, dets[g].second[i].pose.keypoints[j].y);
      }
    }
  }
}

TEST(CocoResults, EmptyDetectionsWriteAnEmptyArray) {
  const std::string path = std::string(::testing::TempDir()) + "posekit_results_empty.json";
  write_results({}, path);
  EXPECT_EQ(read_text(path), "[]\n");
  EXPECT_TRUE(read_results(path).empty());
}

TEST(CocoResults, EntriesCarryFlatKeypointsWithUnitVisibility) {
  Detection d;
  for (int j = 0; j < 4; ++j) d.pose.keypoints.push_back({1.0 + j, 2.0 + j, 2});
  d.score = 0.625;
  const std::string path = std::string(::testing::TempDir()) + "posekit_results_flat.json";
  write_results({{42, {d}}}, path, 9);
  const json doc = json::parse(read_text(path));
  ASSERT_TRUE(doc.is_array());
  ASSERT_EQ(doc.size(), 1u);
  EXPECT_EQ(doc[0].at("image_id").get<std::int64_t>(), 42);
  EXPECT_EQ(doc[0].at("category_id").get<int>(), 9);
  EXPECT_EQ(doc[0].at("score").get<double>(), 0.625);
  const json& kps = doc[0].at("keypoints");
  ASSERT_EQ(kps.size(), 12u);
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(kps[3 * j].get<double>(), 1.0 + j);
    EXPECT_EQ(kps[3 * j + 1].get<double>(), 2.0 + j);
    EXPECT_EQ(kps[3 * j + 2].get<int>(), 1);
  }
}

TEST(CocoResults, MalformedEntriesAreLocated) {
  const std::string obj = write_text_file("res_obj", "{\"a\": 1}");
  EXPECT_THROW(read_results(obj), std::runtime_error);

  const std::string noscore = write_text_file(
      "res_noscore", "[{\"image_id\": 1, \"category_id\": 1, \"keypoints\": [1, 2, 1]}]");
  try {
    read_results(noscore);
    FAIL() << "missing score accepted";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("results[0]"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("'score'"), std::string::npos) << e.what();
  }

  const std::string badlen = write_text_file(
      "res_badlen",
      "[{\"image_id\": 1, \"category_id\": 1, \"keypoints\": [1, 2, 1, 4], \"score\": 0.5}]");
  try {
    read_results(badlen);
    FAIL() << "ragged keypoints accepted";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("not a multiple of 3"), std::string::npos) << e.what();
  }
}

TEST(CocoResults, UnwritablePathThrows) {
  EXPECT_THROW(write_results({}, "/nonexistent-dir/out.json"), std::runtime_error);
}

// Each mutation breaks one documented invariant; the reader must refuse every
// one of them with a message pointing at the offending element.
TEST(CocoFuzz, EveryMutationClassYieldsALocatedError) {
  const auto& mutations = oracles::coco_mutations();
  ASSERT_GE(mutations.size() + 1, 20u);  // + the truncated-text class below

  int index = 0;
  for (const auto& m : mutations) {
    json doc = valid_doc();
    m.apply(doc);
    const std::string path = write_doc("fuzz_" + std::to_string(index++), doc);
    const std::string msg = reader_error(path);
    EXPECT_FALSE(msg.empty()) << m.name << ": mutation silently accepted";
    EXPECT_NE(msg.find(m.expect), std::string::npos) << m.name << " got: " << msg;
  }

  const std::string full = valid_doc().dump(1);
  const std::string truncated =
      write_text_file("fuzz_truncated", full.substr(0, full.size() / 2));
  const std::string msg = reader_error(truncated);
  EXPECT_NE(msg.find("malformed JSON"), std::string::npos) << msg;
}
