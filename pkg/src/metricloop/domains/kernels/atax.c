/* atax style y = A^T (A x), repeated REPS times. */
#include <stdio.h>
#include <time.h>

#ifndef M
#define M 1600
#endif
#ifndef N
#define N 1800
#endif
#ifndef REPS
#define REPS 6
#endif

static double A[M][N];
static double x[N];
static double y[N];
static double tmp[M];

static void init(void)
{
    for (int j = 0; j < N; j++)
        x[j] = 1.0 + (double)j / N;
    for (int i = 0; i < M; i++)
        for (int j = 0; j < N; j++)
            A[i][j] = (double)((i + j) % N) / (5.0 * M);
}

static void kernel(void)
{
    for (int r = 0; r < REPS; r++) {
        for (int j = 0; j < N; j++)
            y[j] = 0.0;
        for (int i = 0; i < M; i++) {
            tmp[i] = 0.0;
            for (int j = 0; j < N; j++)
                tmp[i] = tmp[i] + A[i][j] * x[j];
            for (int j = 0; j < N; j++) { /* @loop L0 */
                /* @load L0 &A[i][j + $D] */
                y[j] = y[j] + A[i][j] * tmp[i];
            }
        }
    }
}

int main(void)
{
    struct timespec t0, t1;
    init();
    clock_gettime(CLOCK_MONOTONIC, &t0);
    kernel();
    clock_gettime(CLOCK_MONOTONIC, &t1);
    double sum = 0.0;
    for (int j = 0; j < N; j++)
        sum += y[j];
    printf("checksum=%.17g\n", sum);
    printf("time=%.9f\n", (t1.tv_sec - t0.tv_sec) + 1e-9 * (t1.tv_nsec - t0.tv_nsec));
    return 0;
}
