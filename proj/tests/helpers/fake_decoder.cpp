// Stand-in for ffprobe/ffmpeg in tests.
//
//   fake_decoder probe  <spec>
//   fake_decoder decode <spec> <width> <height>
//
// spec is "<mode>-<frames>-<W>x<H>[-<fps>]". Frame i is solid gray 10*i (mod
// 256). Modes: "ramp" behaves; "short" streams half the frames it advertises;
// "fail" streams two frames, complains on stderr and exits 3.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

namespace {

struct Spec {
  std::string mode;
  long frames = 0;
  int width = 0;
  int height = 0;
  double fps = 2.0;
};

bool parse_spec(const char* text, Spec& s) {
  char mode[32] = {0};
  double fps = 2.0;
  const int n = std::sscanf(text, "%31[a-z]-%ld-%dx%d-%lf", mode, &s.frames, &s.width, &s.height, &fps);
  if (n < 4) return false;
  s.mode = mode;
  if (n == 5) s.fps = fps;
  return s.frames >= 0 && s.width > 0 && s.height > 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: fake_decoder probe|decode SPEC [W H]\n");
    return 2;
  }
  Spec spec;
  if (!parse_spec(argv[2], spec)) {
    std::fprintf(stderr, "fake_decoder: bad spec '%s'\n", argv[2]);
    return 2;
  }
  if (std::strcmp(argv[1], "probe") == 0) {
    std::printf("{\"frame_count\": %ld, \"fps\": %g, \"width\": %d, \"height\": %d}\n", spec.frames,
                spec.fps, spec.width, spec.height);
    return 0;
  }
  if (std::strcmp(argv[1], "decode") != 0 || argc < 5) return 2;
  const int w = std::atoi(argv[3]);
  const int h = std::atoi(argv[4]);
  if (w != spec.width || h != spec.height) {
    std::fprintf(stderr, "fake_decoder: size %dx%d does not match %dx%d\n", w, h, spec.width, spec.height);
    return 4;
  }
  long emit = spec.frames;
  if (spec.mode == "short") emit = spec.frames / 2;
  if (spec.mode == "fail") emit = spec.frames < 2 ? spec.frames : 2;

  std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 3);
  for (long i = 0; i < emit; ++i) {
    std::memset(buf.data(), static_cast<int>((10 * i) % 256), buf.size());
    if (std::fwrite(buf.data(), 1, buf.size(), stdout) != buf.size()) return 0;  // reader went away
  }
  std::fflush(stdout);
  if (spec.mode == "fail") {
    std::fprintf(stderr, "fake_decoder: corrupt packet at frame %ld\n", emit);
    return 3;
  }
  return 0;
}
