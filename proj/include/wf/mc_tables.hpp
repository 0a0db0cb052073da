#pragma once

namespace wf {

// Edge e connects corners kMcEdgeCorners[e][0..1]; corner numbering:
//   0:(0,0,0) 1:(1,0,0) 2:(1,1,0) 3:(0,1,0)
//   4:(0,0,1) 5:(1,0,1) 6:(1,1,1) 7:(0,1,1)
extern const int kMcTriTable[256][16];
extern const int kMcEdgeCorners[12][2];
extern const int kMcCornerOffset[8][3];

}  // namespace wf
