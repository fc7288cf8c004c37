#include "pathkit/figsplit/figsplit.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "pathkit/core/error.hpp"

namespace pathkit::figsplit {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

}  // namespace

double bbox_iou(const BBox& a, const BBox& b) {
  int ix0 = std::max(a.x, b.x);
  int iy0 = std::max(a.y, b.y);
  int ix1 = std::min(a.x + a.w, b.x + b.w);
  int iy1 = std::min(a.y + a.h, b.y + b.h);
  double inter = static_cast<double>(std::max(0, ix1 - ix0)) *
                 static_cast<double>(std::max(0, iy1 - iy0));
  double area_a = static_cast<double>(a.w) * a.h;
  double area_b = static_cast<double>(b.w) * b.h;
  double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<BBox> normalize_boxes(std::vector<BBox> boxes, int width,
                                  int height, double dedup_iou) {
  if (width <= 0 || height <= 0) {
    throw Error("normalize_boxes: image dimensions must be positive");
  }
  std::vector<BBox> clipped;
  for (const auto& b : boxes) {
    int x0 = std::clamp(b.x, 0, width);
    int y0 = std::clamp(b.y, 0, height);
    int x1 = std::clamp(b.x + b.w, 0, width);
    int y1 = std::clamp(b.y + b.h, 0, height);
    if (x1 - x0 <= 0 || y1 - y0 <= 0) continue;
    clipped.push_back({x0, y0, x1 - x0, y1 - y0, b.confidence});
  }
  // Highest confidence first; earlier index wins exact ties.
  std::stable_sort(clipped.begin(), clipped.end(),
                   [](const BBox& a, const BBox& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<BBox> accepted;
  for (const auto& b : clipped) {
    bool duplicate = false;
    for (const auto& kept : accepted) {
      if (bbox_iou(b, kept) > dedup_iou) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) accepted.push_back(b);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const BBox& a, const BBox& b) {
              return std::tie(a.y, a.x, a.h, a.w) <
                     std::tie(b.y, b.x, b.h, b.w);
            });
  return accepted;
}

Raster load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image: " + path);

  auto next_token = [&in, &path]() -> std::string {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {  // comment to end of line
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!token.empty()) return token;
        continue;
      }
      token.push_back(static_cast<char>(c));
    }
    if (token.empty()) throw Error("truncated PNM header: " + path);
    return token;
  };

  std::string magic = next_token();
  int channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw Error("unsupported image format (want P5/P6): " + path);
  }
  Raster r;
  r.channels = channels;
  r.width = std::stoi(next_token());
  r.height = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (r.width <= 0 || r.height <= 0 || maxval != 255) {
    throw Error("unsupported PNM geometry/maxval: " + path);
  }
  // next_token consumed exactly one whitespace after maxval
  std::size_t n = static_cast<std::size_t>(r.width) * r.height * channels;
  r.pixels.resize(n);
  in.read(reinterpret_cast<char*>(r.pixels.data()),
          static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw Error("truncated pixel data: " + path);
  }
  return r;
}

void save_pnm(const std::string& path, const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) {
    throw Error("raster must have 1 or 3 channels");
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp);
    out << (raster.channels == 1 ? "P5" : "P6") << '\n'
        << raster.width << ' ' << raster.height << '\n'
        << "255\n";
    out.write(reinterpret_cast<const char*>(raster.pixels.data()),
              static_cast<std::streamsize>(raster.pixels.size()));
    out.flush();
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Raster> crop_regions(const Raster& raster,
                                 const std::vector<BBox>& boxes) {
  std::vector<Raster> crops;
  crops.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BBox& b = boxes[i];
    if (b.x < 0 || b.y < 0 || b.w <= 0 || b.h <= 0 ||
        b.x + b.w > raster.width || b.y + b.h > raster.height) {
      throw Error("crop_regions: box " + std::to_string(i) +
                  " outside raster bounds");
    }
    Raster crop;
    crop.width = b.w;
    crop.height = b.h;
    crop.channels = raster.channels;
    crop.pixels.resize(static_cast<std::size_t>(b.w) * b.h * raster.channels);
    std::size_t src_stride =
        static_cast<std::size_t>(raster.width) * raster.channels;
    std::size_t dst_stride = static_cast<std::size_t>(b.w) * raster.channels;
    for (int row = 0; row < b.h; ++row) {
      const std::uint8_t* src = raster.pixels.data() +
                                (static_cast<std::size_t>(b.y) + row) *
                                    src_stride +
                                static_cast<std::size_t>(b.x) * raster.channels;
      std::memcpy(crop.pixels.data() + row * dst_stride, src, dst_stride);
    }
    crops.push_back(std::move(crop));
  }
  return crops;
}

namespace {

struct Marker {
  std::size_t pos;     // offset of the marker's first byte
  std::size_t end;     // offset one past the marker (before the gap)
  std::string label;
  bool numeric;
};

bool parse_label(const std::string& s, std::size_t i, std::size_t* len,
                 bool* numeric) {
  if (i >= s.size()) return false;
  unsigned char c = s[i];
  if (std::isalpha(c)) {
    *len = 1;
    *numeric = false;
    return true;
  }
  if (std::isdigit(c)) {
    *len = (i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))
               ? 2
               : 1;
    *numeric = true;
    return true;
  }
  return false;
}

// Markers must sit at a segment start and be followed by whitespace or the
// caption end; "2.5 times" mid-sentence therefore never splits.
std::vector<Marker> find_markers(const std::string& caption) {
  std::vector<Marker> markers;
  for (std::size_t i = 0; i < caption.size(); ++i) {
    if (i > 0 && !std::isspace(static_cast<unsigned char>(caption[i - 1]))) {
      continue;
    }
    std::size_t label_at, label_len, end;
    bool numeric;
    if (caption[i] == '(') {
      label_at = i + 1;
      if (!parse_label(caption, label_at, &label_len, &numeric)) continue;
      end = label_at + label_len;
      if (end >= caption.size() || caption[end] != ')') continue;
      ++end;
    } else {
      label_at = i;
      if (!parse_label(caption, label_at, &label_len, &numeric)) continue;
      end = label_at + label_len;
      if (end >= caption.size()) continue;
      char close = caption[end];
      if (close != ')' && close != '.' && close != ':') continue;
      ++end;
    }
    if (end < caption.size() &&
        !std::isspace(static_cast<unsigned char>(caption[end]))) {
      continue;
    }
    markers.push_back({i, end, caption.substr(label_at, label_len), numeric});
    i = end - 1;
  }
  return markers;
}

}  // namespace

std::vector<SubCaption> split_caption_rules(const std::string& caption) {
  std::vector<Marker> markers = find_markers(caption);

  if (!markers.empty()) {
    // Mixed letter/number captions split on the majority class (letters win
    // ties); a repeated label is an in-text panel reference, not a marker.
    std::size_t numeric_count = 0;
    for (const auto& m : markers) numeric_count += m.numeric ? 1 : 0;
    bool keep_numeric = numeric_count > markers.size() - numeric_count;
    std::vector<Marker> selected;
    std::set<std::string> seen;
    for (const auto& m : markers) {
      if (m.numeric != keep_numeric) continue;
      if (!seen.insert(m.label).second) continue;
      selected.push_back(m);
    }
    markers = std::move(selected);
  }

  std::vector<SubCaption> parts;
  if (!markers.empty()) {
    std::string preamble = trim(caption.substr(0, markers.front().pos));
    for (std::size_t k = 0; k < markers.size(); ++k) {
      std::size_t body_end =
          k + 1 < markers.size() ? markers[k + 1].pos : caption.size();
      std::string body =
          trim(caption.substr(markers[k].end, body_end - markers[k].end));
      if (body.empty()) continue;
      SubCaption sc;
      sc.panel_label = markers[k].label;
      sc.text = preamble.empty() ? body : preamble + " " + body;
      parts.push_back(std::move(sc));
    }
  }
  if (parts.empty()) {
    SubCaption whole;
    std::string text = trim(caption);
    whole.text = text.empty() ? caption : text;
    parts.push_back(std::move(whole));
  }
  return parts;
}

bool valid_subcaption_parts(const std::vector<TransformPart>& parts) {
  if (parts.empty()) return false;
  std::set<std::string> labels;
  for (const auto& p : parts) {
    if (trim(p.text).empty()) return false;
    if (!p.label.empty() && !labels.insert(p.label).second) return false;
  }
  return true;
}

std::vector<SubCaption> split_caption_llm(const std::string& caption,
                                          const TextTransformClient& client,
                                          DiagnosticsSink* diags,
                                          const std::string& record_id) {
  auto fallback = [&](const std::string& reason) {
    if (diags) diags->add("split_caption", record_id, reason);
    auto parts = split_caption_rules(caption);
    for (auto& p : parts) p.llm_fallback = true;
    return parts;
  };

  TransformResponse resp;
  try {
    resp = client.call({"split_caption", caption, ""});
  } catch (const ClientError& e) {
    return fallback(std::string("client failure, rule fallback: ") + e.what());
  }
  if (!valid_subcaption_parts(resp.parts)) {
    return fallback("invalid split response, rule fallback");
  }
  std::vector<SubCaption> out;
  out.reserve(resp.parts.size());
  for (const auto& p : resp.parts) {
    SubCaption sc;
    sc.panel_label = p.label;
    sc.text = p.text;
    out.push_back(std::move(sc));
  }
  return out;
}

RefineOutcome refine_caption(const std::string& caption,
                             const TextTransformClient& client,
                             DiagnosticsSink* diags,
                             const std::string& record_id) {
  try {
    TransformResponse resp = client.call({"refine_caption", caption, ""});
    if (resp.text && !trim(*resp.text).empty()) {
      return {*resp.text, true};
    }
    if (diags) diags->add("refine_caption", record_id, "empty refine response");
  } catch (const ClientError& e) {
    if (diags) diags->add("refine_caption", record_id, e.what());
  }
  return {caption, false};
}

DetectionSidecar load_detection_sidecar(const std::string& path) {
  DetectionSidecar sidecar;
  for_each_jsonl_file(path, [&](std::size_t offset, const ojson& obj) {
    if (!obj.contains("record_id") || !obj.contains("boxes")) {
      throw FramingError("detection sidecar line missing record_id/boxes",
                         offset);
    }
    std::vector<BBox> boxes;
    for (const auto& b : obj["boxes"]) {
      boxes.push_back({b.value("x", 0), b.value("y", 0), b.value("w", 0),
                       b.value("h", 0), b.value("confidence", 0.0f)});
    }
    sidecar.boxes[obj["record_id"].get<std::string>()] = std::move(boxes);
  });
  return sidecar;
}

ojson subfigure_to_json(const SubFigure& sf) {
  ojson obj;
  obj["parent_record_id"] = sf.parent_record_id;
  obj["panel_index"] = sf.panel_index;
  ojson box;
  box["x"] = sf.bbox.x;
  box["y"] = sf.bbox.y;
  box["w"] = sf.bbox.w;
  box["h"] = sf.bbox.h;
  box["confidence"] = sf.bbox.confidence;
  obj["bbox"] = box;
  obj["crop_ref"] = sf.crop_ref;
  return obj;
}

SubFigure subfigure_from_json(const ojson& obj) {
  SubFigure sf;
  sf.parent_record_id = obj.at("parent_record_id").get<std::string>();
  sf.panel_index = obj.at("panel_index").get<int>();
  const auto& box = obj.at("bbox");
  sf.bbox = {box.at("x").get<int>(), box.at("y").get<int>(),
             box.at("w").get<int>(), box.at("h").get<int>(),
             box.at("confidence").get<float>()};
  sf.crop_ref = obj.at("crop_ref").get<std::string>();
  return sf;
}

ojson subcaption_to_json(const SubCaption& sc) {
  ojson obj;
  obj["parent_record_id"] = sc.parent_record_id;
  obj["panel_label"] = sc.panel_label;
  obj["text"] = sc.text;
  obj["llm_fallback"] = sc.llm_fallback;
  return obj;
}

SubCaption subcaption_from_json(const ojson& obj) {
  SubCaption sc;
  sc.parent_record_id = obj.at("parent_record_id").get<std::string>();
  sc.panel_label = obj.value("panel_label", std::string());
  sc.text = obj.at("text").get<std::string>();
  sc.llm_fallback = obj.value("llm_fallback", false);
  return sc;
}

}  // namespace pathkit::figsplit
