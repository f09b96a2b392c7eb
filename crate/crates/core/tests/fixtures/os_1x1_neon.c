/* neon_c int8 kernel: os input=0 weight=0 | ih=2 iw=2 ic=16 oc=1 fh=1 fw=1 s=1 pad=0 | x=16 */
#ifndef CONV_OS_1X1_H
#define CONV_OS_1X1_H

#include <stdint.h>
#include <string.h>

#if defined(__ARM_NEON)
#include <arm_neon.h>
#else
/* Portable stand-ins for the NEON intrinsics used below. */
typedef struct { int8_t v[16]; } int8x16_t;
typedef struct { int8_t v[8]; } int8x8_t;
typedef struct { int16_t v[8]; } int16x8_t;
typedef struct { int32_t v[4]; } int32x4_t;
typedef struct { uint8_t v[16]; } uint8x16_t;
typedef struct { uint16_t v[8]; } uint16x8_t;

static inline int8x16_t vld1q_s8(const int8_t *p) { int8x16_t r; memcpy(r.v, p, 16); return r; }
static inline int8x8_t vget_low_s8(int8x16_t a) { int8x8_t r; memcpy(r.v, a.v, 8); return r; }
static inline int8x8_t vget_high_s8(int8x16_t a) { int8x8_t r; memcpy(r.v, a.v + 8, 8); return r; }
static inline int16x8_t vmovl_s8(int8x8_t a) { int16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = a.v[i]; return r; }
static inline int16x8_t vmulq_s16(int16x8_t a, int16x8_t b) { int16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = (int16_t)(a.v[i] * b.v[i]); return r; }
static inline int32x4_t vdupq_n_s32(int32_t x) { int32x4_t r; for (int i = 0; i < 4; ++i) r.v[i] = x; return r; }
static inline int32x4_t vpaddlq_s16(int16x8_t a) { int32x4_t r; for (int i = 0; i < 4; ++i) r.v[i] = (int32_t)a.v[2 * i] + a.v[2 * i + 1]; return r; }
static inline int32x4_t vpadalq_s16(int32x4_t acc, int16x8_t a) { for (int i = 0; i < 4; ++i) acc.v[i] += (int32_t)a.v[2 * i] + a.v[2 * i + 1]; return acc; }
static inline int32x4_t vaddq_s32(int32x4_t a, int32x4_t b) { for (int i = 0; i < 4; ++i) a.v[i] += b.v[i]; return a; }
static inline int32_t vaddvq_s32(int32x4_t a) { return a.v[0] + a.v[1] + a.v[2] + a.v[3]; }
static inline int32_t vaddlvq_s16(int16x8_t a) { int32_t s = 0; for (int i = 0; i < 8; ++i) s += a.v[i]; return s; }
static inline uint8x16_t vld1q_u8(const uint8_t *p) { uint8x16_t r; memcpy(r.v, p, 16); return r; }
static inline uint8x16_t veorq_u8(uint8x16_t a, uint8x16_t b) { for (int i = 0; i < 16; ++i) a.v[i] ^= b.v[i]; return a; }
static inline uint8x16_t vcntq_u8(uint8x16_t a) { for (int i = 0; i < 16; ++i) { uint8_t x = a.v[i], n = 0; while (x) { n += x & 1; x >>= 1; } a.v[i] = n; } return a; }
static inline uint16x8_t vpaddlq_u8(uint8x16_t a) { uint16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = (uint16_t)(a.v[2 * i] + a.v[2 * i + 1]); return r; }
static inline uint16x8_t vaddq_u16(uint16x8_t a, uint16x8_t b) { for (int i = 0; i < 8; ++i) a.v[i] = (uint16_t)(a.v[i] + b.v[i]); return a; }
static inline uint16x8_t vdupq_n_u16(uint16_t x) { uint16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = x; return r; }
static inline uint32_t vaddlvq_u16(uint16x8_t a) { uint32_t s = 0; for (int i = 0; i < 8; ++i) s += a.v[i]; return s; }
#endif

typedef struct { int16x8_t p[2]; int32x4_t a[2]; } vvar;

static inline void v_load(vvar *d, const int8_t *src) {
    int8x16_t t0 = vld1q_s8(src + 0);
    d->p[0] = vmovl_s8(vget_low_s8(t0));
    d->p[1] = vmovl_s8(vget_high_s8(t0));
}
static inline void v_zero(vvar *d) {
    d->a[0] = vdupq_n_s32(0);
    d->a[1] = vdupq_n_s32(0);
}
static inline void v_mul(vvar *d, const vvar *a, const vvar *b) {
    d->p[0] = vmulq_s16(a->p[0], b->p[0]);
    d->p[1] = vmulq_s16(a->p[1], b->p[1]);
}
static inline void v_add_ap(vvar *d, const vvar *a, const vvar *b) {
    d->a[0] = vpadalq_s16(a->a[0], b->p[0]);
    d->a[1] = vpadalq_s16(a->a[1], b->p[1]);
}
static inline void v_add_pp(vvar *d, const vvar *a, const vvar *b) {
    d->a[0] = vpadalq_s16(vpaddlq_s16(a->p[0]), b->p[0]);
    d->a[1] = vpadalq_s16(vpaddlq_s16(a->p[1]), b->p[1]);
}
static inline void v_add_aa(vvar *d, const vvar *a, const vvar *b) {
    d->a[0] = vaddq_s32(a->a[0], b->a[0]);
    d->a[1] = vaddq_s32(a->a[1], b->a[1]);
}
static inline int32_t v_redsum_a(const vvar *a) { return vaddvq_s32(a->a[0]) + vaddvq_s32(a->a[1]); }
static inline int32_t v_redsum_p(const vvar *a) { return vaddlvq_s16(a->p[0]) + vaddlvq_s16(a->p[1]); }

void conv_os_1x1(const int8_t *input, const int8_t *weight, int32_t *output) {
    memset(output, 0, sizeof(int32_t) * 4);
    for (int cb = 0; cb < 1; ++cb) {
        for (int k = 0; k < 1; ++k) {
            const int8_t *in = input + (size_t)cb * 64;
            const int8_t *wgt = weight + ((size_t)cb * 1 + k) * 16;
            int32_t *out = output + (size_t)k * 4;
            vvar v0, v1, v2;
            int32_t s;
            v_zero(&v2);
            v_load(&v0, in + 0);
            v_load(&v1, wgt + 0);
            v_mul(&v0, &v0, &v1);
            v_add_ap(&v2, &v2, &v0);
            s = v_redsum_a(&v2);
            out[0] += s;
            v_zero(&v2);
            v_load(&v0, in + 16);
            v_load(&v1, wgt + 0);
            v_mul(&v0, &v0, &v1);
            v_add_ap(&v2, &v2, &v0);
            s = v_redsum_a(&v2);
            out[1] += s;
            v_zero(&v2);
            v_load(&v0, in + 32);
            v_load(&v1, wgt + 0);
            v_mul(&v0, &v0, &v1);
            v_add_ap(&v2, &v2, &v0);
            s = v_redsum_a(&v2);
            out[2] += s;
            v_zero(&v2);
            v_load(&v0, in + 48);
            v_load(&v1, wgt + 0);
            v_mul(&v0, &v0, &v1);
            v_add_ap(&v2, &v2, &v0);
            s = v_redsum_a(&v2);
            out[3] += s;
        }
    }
}

#endif /* CONV_OS_1X1_H */
