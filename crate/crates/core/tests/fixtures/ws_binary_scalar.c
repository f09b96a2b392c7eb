/* scalar_c binary kernel: ws input=0 output=0 | ih=3 iw=3 ic=64 oc=1 fh=2 fw=2 s=1 pad=0 | x=64 */

#include <stdint.h>
#include <string.h>

#define XB 8
typedef struct { uint8_t b[XB]; int32_t n[XB]; } vvar;

static inline int32_t pc8(uint8_t v) { int32_t n = 0; while (v) { n += v & 1; v >>= 1; } return n; }
static inline void v_load(vvar *d, const uint8_t *src) { for (int i = 0; i < XB; ++i) d->b[i] = src[i]; }
static inline void v_zero(vvar *d) { for (int i = 0; i < XB; ++i) d->n[i] = 0; }
static inline void v_xor(vvar *d, const vvar *a, const vvar *b) { for (int i = 0; i < XB; ++i) d->b[i] = a->b[i] ^ b->b[i]; }
static inline void v_popcnt(vvar *d, const vvar *a) { for (int i = 0; i < XB; ++i) d->n[i] = pc8(a->b[i]); }
static inline void v_add(vvar *d, const vvar *a, const vvar *b) { for (int i = 0; i < XB; ++i) d->n[i] = a->n[i] + b->n[i]; }
static inline int32_t v_redsum(const vvar *a) { int32_t s = 0; for (int i = 0; i < XB; ++i) s += a->n[i]; return s; }

void conv_ws_bin(const uint8_t *input, const uint8_t *weight, int32_t *output) {
    memset(output, 0, sizeof(int32_t) * 4);
    for (int cb = 0; cb < 1; ++cb) {
        const int32_t valid = 64 - cb * 64 < 64 ? 64 - cb * 64 : 64;
        for (int k = 0; k < 1; ++k) {
            const uint8_t *in = input + (size_t)cb * 72;
            const uint8_t *wgt = weight + ((size_t)cb * 1 + k) * 32;
            int32_t *out = output + (size_t)k * 4;
            vvar v0, v1, v2;
            int32_t s;
            v_load(&v1, wgt + 0);
            v_load(&v0, in + 0);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[0] += s;
            v_load(&v0, in + 8);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[1] += s;
            v_load(&v0, in + 24);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[2] += s;
            v_load(&v0, in + 32);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[3] += s;
            v_load(&v1, wgt + 8);
            v_load(&v0, in + 8);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[0] += s;
            v_load(&v0, in + 16);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[1] += s;
            v_load(&v0, in + 32);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[2] += s;
            v_load(&v0, in + 40);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[3] += s;
            v_load(&v1, wgt + 16);
            v_load(&v0, in + 24);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[0] += s;
            v_load(&v0, in + 32);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[1] += s;
            v_load(&v0, in + 48);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[2] += s;
            v_load(&v0, in + 56);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[3] += s;
            v_load(&v1, wgt + 24);
            v_load(&v0, in + 32);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[0] += s;
            v_load(&v0, in + 40);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[1] += s;
            v_load(&v0, in + 56);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[2] += s;
            v_load(&v0, in + 64);
            v_xor(&v2, &v0, &v1);
            v_popcnt(&v2, &v2);
            s = 1 * valid - 2 * v_redsum(&v2);
            out[3] += s;
        }
    }
}
