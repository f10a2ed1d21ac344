package com.rand.util;

import java.security.SecureRandom;
import java.util.Random;

public class Tokens {
    private static final long SEED = 42L;

    public int weak() {
        Random r = new Random(SEED);
        return r.nextInt();
    }

    public int literalSeed() {
        return new Random(1234).nextInt();
    }

    public byte[] seededSecure() {
        SecureRandom sr = new SecureRandom(new byte[]{1, 2, 3, 4});
        byte[] out = new byte[16];
        sr.nextBytes(out);
        return out;
    }

    public int timeSeeded() {
        return new Random(System.nanoTime()).nextInt();
    }

    public int unseeded() {
        return new Random().nextInt();
    }
}
