package com.bank.crypto;

import javax.crypto.Cipher;
import javax.crypto.Mac;
import javax.crypto.spec.IvParameterSpec;
import javax.crypto.spec.SecretKeySpec;

public class KeyMaterial {
    public SecretKeySpec shortKey() {
        return new SecretKeySpec(new byte[16], "AES");
    }

    public SecretKeySpec longKey() {
        return new SecretKeySpec(new byte[32], "AES");
    }

    public Cipher gcm() throws Exception {
        return Cipher.getInstance("AES/GCM/NoPadding");
    }

    public IvParameterSpec zeroIv() {
        return new IvParameterSpec(new byte[]{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    }

    public Mac mac() throws Exception {
        return Mac.getInstance("HmacSHA256");
    }
}
