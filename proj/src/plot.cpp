#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "scalebench/manifest.hpp"

namespace scalebench {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;

const std::array<cv::Scalar, 6> kColors{
    cv::Scalar(180, 119, 31), cv::Scalar(14, 127, 255), cv::Scalar(44, 160, 44),
    cv::Scalar(40, 39, 214),  cv::Scalar(189, 103, 148), cv::Scalar(75, 86, 140)};

void put(cv::Mat& img, const std::string& text, cv::Point at, double size = 0.45) {
  cv::putText(img, text, at, cv::FONT_HERSHEY_SIMPLEX, size, cv::Scalar(30, 30, 30), 1, cv::LINE_AA);
}

}  // namespace

void write_curve_plot(const std::filesystem::path& path, const std::string& title,
                      const std::vector<PlotSeries>& series, const std::string& y_label) {
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  const int pw = kWidth - kLeft - kRight;
  const int ph = kHeight - kTop - kBottom;

  // x axis: log2 of the degradation factor, 1:1 on the left.
  int max_factor = 1;
  for (const auto& s : series) {
    for (const auto& p : s.points) max_factor = std::max(max_factor, p.factor);
  }
  const double x_span = std::max(1.0, std::log2(static_cast<double>(max_factor)));
  auto to_px = [&](int factor, double score) {
    const double fx = std::log2(static_cast<double>(factor)) / x_span;
    const double fy = std::clamp(score / 100.0, 0.0, 1.0);
    return cv::Point(kLeft + static_cast<int>(fx * pw), kTop + static_cast<int>((1.0 - fy) * ph));
  };

  for (int v = 0; v <= 100; v += 20) {
    const auto a = to_px(1, v);
    cv::line(img, a, cv::Point(kLeft + pw, a.y), cv::Scalar(225, 225, 225), 1);
    put(img, std::to_string(v), cv::Point(kLeft - 35, a.y + 5));
  }
  for (int f = 1; f <= max_factor; f *= 2) {
    const auto a = to_px(f, 0);
    cv::line(img, a, cv::Point(a.x, a.y + 5), cv::Scalar(30, 30, 30), 1);
    put(img, "1:" + std::to_string(f), cv::Point(a.x - 12, a.y + 22));
  }
  cv::rectangle(img, cv::Point(kLeft, kTop), cv::Point(kLeft + pw, kTop + ph), cv::Scalar(30, 30, 30), 1);
  put(img, title, cv::Point(kLeft, kTop - 15), 0.55);
  put(img, "scale", cv::Point(kLeft + pw / 2 - 20, kHeight - 12));
  put(img, y_label, cv::Point(8, kTop - 15));

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto color = kColors[i % kColors.size()];
    auto pts = series[i].points;
    std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.factor < b.factor; });
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const auto p = to_px(pts[j].factor, pts[j].score);
      cv::circle(img, p, 3, color, cv::FILLED, cv::LINE_AA);
      if (j > 0) cv::line(img, to_px(pts[j - 1].factor, pts[j - 1].score), p, color, 2, cv::LINE_AA);
    }
    const int ly = kTop + 15 + static_cast<int>(i) * 20;
    cv::line(img, cv::Point(kLeft + pw + 12, ly - 4), cv::Point(kLeft + pw + 32, ly - 4), color, 2);
    put(img, series[i].label.substr(0, 18), cv::Point(kLeft + pw + 38, ly));
  }
  if (!cv::imwrite(path.string(), img)) throw std::runtime_error("cannot write plot " + path.string());
}

}  // namespace scalebench
