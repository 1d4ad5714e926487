// Stand-in for the flow network in tests: for every seg_<k>_input.bin in the
// directory given as argv[1], writes a seg_<k>_flow.bin whose mask is the
// input's trajectory plot and whose flow is the constant (argv[2], argv[3])
// pixels. With argv[4] == "shift" the written frame range is off by one.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "locfuse/exchange.h"

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: fake_flow_backend DIR DX DY [shift]\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  const float dx = std::strtof(argv[2], nullptr);
  const float dy = std::strtof(argv[3], nullptr);
  const bool shift = argc > 4 && std::string(argv[4]) == "shift";
  for (size_t k = 0;; ++k) {
    const auto in_path = locfuse::SampleInputPath(dir, k);
    if (!std::filesystem::exists(in_path)) break;
    const locfuse::ExchangeFile in = locfuse::ReadExchangeFile(in_path);
    locfuse::FlowField flow;
    for (int r = 0; r < locfuse::kSampleSize; ++r) {
      for (int c = 0; c < locfuse::kSampleSize; ++c) {
        if (in.image.at(3, r, c) + in.image.at(4, r, c) + in.image.at(5, r, c) > 0.0f) {
          flow.mask[static_cast<size_t>(r) * locfuse::kSampleSize + c] = 1;
          flow.flow.at(0, r, c) = dx;
          flow.flow.at(1, r, c) = dy;
        }
      }
    }
    locfuse::ExchangeHeader h = in.header;
    h.channels = 3;
    if (shift) h.frame_range.last += 1;
    locfuse::WriteFlowFile(locfuse::SampleFlowPath(dir, k), h, flow);
  }
  return 0;
}
