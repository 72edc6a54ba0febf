/* jacobi-2d style 5-point stencil. Prints checksum and kernel time. */
#include <stdio.h>
#include <time.h>

#ifndef N
#define N 400
#endif
#ifndef TSTEPS
#define TSTEPS 40
#endif

static double A[N][N];
static double B[N][N];

static void init(void)
{
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++) {
            A[i][j] = ((double)i * (j + 2) + 2) / N;
            B[i][j] = ((double)i * (j + 3) + 3) / N;
        }
}

static void kernel(void)
{
    for (int t = 0; t < TSTEPS; t++) {
        for (int i = 1; i < N - 1; i++) {
            for (int j = 1; j < N - 1; j++) { /* @loop L0 */
                /* @load L0 &A[i + 1][j + $D] */
                B[i][j] = 0.2 * (A[i][j] + A[i][j - 1] + A[i][1 + j] + A[1 + i][j] + A[i - 1][j]);
            }
        }
        for (int i = 1; i < N - 1; i++) {
            for (int j = 1; j < N - 1; j++) { /* @loop L1 */
                /* @load L1 &B[i + 1][j + $D] */
                A[i][j] = 0.2 * (B[i][j] + B[i][j - 1] + B[i][1 + j] + B[1 + i][j] + B[i - 1][j]);
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
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++)
            sum += A[i][j];
    printf("checksum=%.17g\n", sum);
    printf("time=%.9f\n", (t1.tv_sec - t0.tv_sec) + 1e-9 * (t1.tv_nsec - t0.tv_nsec));
    return 0;
}
