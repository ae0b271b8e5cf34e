#include "coco_fuzz.hpp"

namespace posekit::oracles {

using nlohmann::json;

json valid_keypoints_doc() {
  json doc;
  doc["images"] = json::array();
  doc["images"].push_back({{"id", 1}, {"width", 64}, {"height", 64}, {"file_name", "a.png"}});
  doc["images"].push_back({{"id", 2}, {"width", 32}, {"height", 48}, {"file_name", "b.png"}});

  json cat = {{"id", 1}, {"name", "person"}};
  cat["keypoints"] = json::array({"head", "lhand", "rhand"});
  cat["skeleton"] = json::array();
  cat["skeleton"].push_back(json::array({1, 2}));
  cat["skeleton"].push_back(json::array({1, 3}));
  doc["categories"] = json::array({cat});

  json a0 = {{"id", 10}, {"image_id", 1}, {"category_id", 1}, {"area", 30.25},
             {"iscrowd", 0}, {"num_keypoints", 3}};
  a0["keypoints"] = json::array({5.0, 6.0, 2, 8.5, 9.5, 2, 11.0, 4.0, 1});
  a0["bbox"] = json::array({5.0, 4.0, 6.0, 5.5});
  json a1 = {{"id", 11}, {"image_id", 1}, {"category_id", 1}, {"area", 12.0}, {"iscrowd", 1}};
  a1["keypoints"] = json::array({20.0, 20.0, 2, 22.0, 24.0, 0, 25.0, 21.0, 2});
  json a2 = {{"id", 12}, {"image_id", 2}, {"category_id", 1}, {"iscrowd", 0}};
  a2["keypoints"] = json::array({1.5, 2.5, 2, 3.5, 4.5, 2, 5.5, 6.5, 2});
  doc["annotations"] = json::array({a0, a1, a2});
  return doc;
}

const std::vector<CocoMutation>& coco_mutations() {
  static const std::vector<CocoMutation> mutations = {
      {"root-array", [](json& d) { d = json::array({1, 2}); }, "must be an object"},
      {"images-missing", [](json& d) { d.erase("images"); }, "missing 'images'"},
      {"images-not-array", [](json& d) { d["images"] = 5; }, "'images' must be an array"},
      {"image-not-object", [](json& d) { d["images"][0] = "x"; }, "images[0]"},
      {"image-missing-id", [](json& d) { d["images"][0].erase("id"); },
       "images[0]: missing 'id'"},
      {"image-id-not-integer", [](json& d) { d["images"][0]["id"] = 1.5; },
       "'id' must be an integer"},
      {"duplicate-image-id", [](json& d) { d["images"][1]["id"] = 1; }, "duplicate image id 1"},
      {"file-name-not-string", [](json& d) { d["images"][0]["file_name"] = 3; },
       "'file_name' must be a string"},
      {"annotations-missing", [](json& d) { d.erase("annotations"); }, "missing 'annotations'"},
      {"annotations-not-array", [](json& d) { d["annotations"] = "zz"; },
       "'annotations' must be an array"},
      {"annotation-not-object", [](json& d) { d["annotations"][0] = 7; }, "annotations[0]"},
      {"annotation-missing-id", [](json& d) { d["annotations"][0].erase("id"); },
       "annotations[0]: missing 'id'"},
      {"annotation-missing-image-id", [](json& d) { d["annotations"][0].erase("image_id"); },
       "missing 'image_id'"},
      {"dangling-image-id", [](json& d) { d["annotations"][0]["image_id"] = 99; },
       "image_id 99 does not match any image"},
      {"annotation-missing-category", [](json& d) { d["annotations"][0].erase("category_id"); },
       "missing 'category_id'"},
      {"foreign-category-id", [](json& d) { d["annotations"][0]["category_id"] = 4; },
       "category_id 4 ≠ 1"},
      {"keypoints-missing", [](json& d) { d["annotations"][0].erase("keypoints"); },
       "missing 'keypoints'"},
      {"keypoints-not-array", [](json& d) { d["annotations"][0]["keypoints"] = 3; },
       "'keypoints' must be an array"},
      {"keypoints-ragged",
       [](json& d) {
         json cut = json::array();
         for (int i = 0; i < 7; ++i) cut.push_back(d["annotations"][0]["keypoints"][i]);
         d["annotations"][0]["keypoints"] = cut;
       },
       "keypoints length 7 ≠ 9"},
      {"keypoints-wrong-joint-count",
       [](json& d) {
         json cut = json::array();
         for (int i = 0; i < 6; ++i) cut.push_back(d["annotations"][0]["keypoints"][i]);
         d["annotations"][0]["keypoints"] = cut;
       },
       "keypoints length 6 ≠ 9"},
      {"keypoint-not-number", [](json& d) { d["annotations"][0]["keypoints"][0] = "x"; },
       "'keypoints' must be a number"},
      {"visibility-out-of-range", [](json& d) { d["annotations"][0]["keypoints"][2] = 7; },
       "visibility 7 must be 0, 1, or 2"},
      {"categories-missing", [](json& d) { d.erase("categories"); }, "missing 'categories'"},
      {"categories-not-array", [](json& d) { d["categories"] = 1; },
       "'categories' must be an array"},
      {"categories-empty", [](json& d) { d["categories"] = json::array(); },
       "exactly one keypoint category, found 0"},
      {"two-keypoint-categories",
       [](json& d) { d["categories"].push_back(d["categories"][0]); },
       "exactly one keypoint category, found 2"},
      {"category-missing-id", [](json& d) { d["categories"][0].erase("id"); },
       "categories[0]: missing 'id'"},
      {"category-names-not-strings",
       [](json& d) { d["categories"][0]["keypoints"] = json::array({1, 2, 3}); },
       "keypoint names must be strings"},
      {"category-keypoints-empty",
       [](json& d) { d["categories"][0]["keypoints"] = json::array(); },
       "at least one joint"},
      {"iscrowd-out-of-range", [](json& d) { d["annotations"][0]["iscrowd"] = 3; },
       "'iscrowd' must be 0 or 1"},
      {"area-not-number", [](json& d) { d["annotations"][0]["area"] = "big"; },
       "'area' must be a number"},
  };
  return mutations;
}

}  // namespace posekit::oracles
