#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pathkit/core/client.hpp"
#include "pathkit/core/diagnostics.hpp"
#include "pathkit/core/jsonl.hpp"

namespace pathkit::figsplit {

// Detector output box, top-left origin pixel coordinates.
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  float confidence = 0.0f;
};

double bbox_iou(const BBox& a, const BBox& b);

// Clips boxes to the image, drops boxes that end up with zero area, merges
// near-duplicates (IoU > dedup_iou, keeping the higher confidence) and sorts
// by (y, x).
std::vector<BBox> normalize_boxes(std::vector<BBox> boxes, int width,
                                  int height, double dedup_iou = 0.9);

// 8-bit raster, row-major, 1 (grayscale) or 3 (RGB) channels.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;  // width * height * channels bytes
};

// Binary PGM (P5) / PPM (P6), the raster carrier for crops.
Raster load_pnm(const std::string& path);
void save_pnm(const std::string& path, const Raster& raster);

// Pixel-exact sub-rasters, one per box, in box order. Boxes must already be
// normalized against the raster dimensions.
std::vector<Raster> crop_regions(const Raster& raster,
                                 const std::vector<BBox>& boxes);

struct SubFigure {
  std::string parent_record_id;
  int panel_index = 0;
  BBox bbox;
  std::string crop_ref;
};

struct SubCaption {
  std::string parent_record_id;
  std::string panel_label;  // empty when the caption had no markers
  std::string text;
  bool llm_fallback = false;  // set when the rule-based fallback produced it
};

// Rule-based splitter. A panel marker is a label (single letter or 1-2 digit
// number) wrapped as "(L)", "L)", "L." or "L:", standing at a segment start
// (start of caption or after whitespace) and followed by whitespace or the
// end of the caption. Text before the first marker is shared preamble and is
// prepended to every sub-caption. Mixed letter/number captions split on the
// majority marker class; repeated labels are treated as in-text references,
// not markers. No markers -> one unlabeled sub-caption.
std::vector<SubCaption> split_caption_rules(const std::string& caption);

// Validator shared by the LLM path and its tests: labels unique when
// present, every part non-empty.
bool valid_subcaption_parts(const std::vector<TransformPart>& parts);

// LLM-backed splitter; falls back to split_caption_rules (flagging the
// output) on transport failure or when the response fails validation.
std::vector<SubCaption> split_caption_llm(const std::string& caption,
                                          const TextTransformClient& client,
                                          DiagnosticsSink* diags = nullptr,
                                          const std::string& record_id = "");

struct RefineOutcome {
  std::string text;
  bool refined = false;
};

// Returns the client's refined text when non-empty; otherwise the original
// caption with refined=false.
RefineOutcome refine_caption(const std::string& caption,
                             const TextTransformClient& client,
                             DiagnosticsSink* diags = nullptr,
                             const std::string& record_id = "");

// Detection sidecar: line-delimited {record_id, boxes:[{x,y,w,h,confidence}]}.
struct DetectionSidecar {
  std::map<std::string, std::vector<BBox>> boxes;
};

DetectionSidecar load_detection_sidecar(const std::string& path);

ojson subfigure_to_json(const SubFigure& sf);
ojson subcaption_to_json(const SubCaption& sc);
SubFigure subfigure_from_json(const ojson& obj);
SubCaption subcaption_from_json(const ojson& obj);

}  // namespace pathkit::figsplit
